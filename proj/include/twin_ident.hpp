#pragma once

#include "twin_ident/commands.hpp"
#include "twin_ident/dynamics.hpp"
#include "twin_ident/error.hpp"
#include "twin_ident/identify.hpp"
#include "twin_ident/io.hpp"
#include "twin_ident/mesh.hpp"
#include "twin_ident/metrics.hpp"
#include "twin_ident/pose.hpp"
#include "twin_ident/pso.hpp"
#include "twin_ident/random.hpp"
#include "twin_ident/viewpoint.hpp"

#pragma once

#include "merton_arena/core_types.hpp"
#include "merton_arena/equilibrium_mfg.hpp"
#include "merton_arena/equilibrium_nplayer.hpp"
#include "merton_arena/errors.hpp"
#include "merton_arena/io.hpp"
#include "merton_arena/policy.hpp"
#include "merton_arena/simulation.hpp"
#include "merton_arena/verification.hpp"

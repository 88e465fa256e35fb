#pragma once

#include "gsync/commands.hpp"
#include "gsync/config.hpp"
#include "gsync/contraction.hpp"
#include "gsync/diagnostics.hpp"
#include "gsync/dynsys.hpp"
#include "gsync/error.hpp"
#include "gsync/gs.hpp"
#include "gsync/interval.hpp"
#include "gsync/io.hpp"
#include "gsync/linalg.hpp"
#include "gsync/observation.hpp"
#include "gsync/region.hpp"
#include "gsync/statemaps.hpp"

#pragma once

#include "twophoton/analysis.hpp"
#include "twophoton/apparatus.hpp"
#include "twophoton/config.hpp"
#include "twophoton/errors.hpp"
#include "twophoton/optics.hpp"
#include "twophoton/parallel.hpp"
#include "twophoton/pump.hpp"
#include "twophoton/rng.hpp"
#include "twophoton/scan_result.hpp"
#include "twophoton/scenario.hpp"

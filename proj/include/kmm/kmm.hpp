#pragma once

#include "kmm/errors.hpp"
#include "kmm/rng.hpp"
#include "kmm/kinetic_market.hpp"
#include "kmm/tsplib.hpp"
#include "kmm/variation.hpp"
#include "kmm/replacement.hpp"
#include "kmm/harness.hpp"
#include "kmm/plot.hpp"

#pragma once

#include "asymptotics.hpp"
#include "designs.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "experiments.hpp"
#include "io.hpp"
#include "rng.hpp"

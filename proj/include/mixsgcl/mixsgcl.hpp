#pragma once

#include "mixsgcl/augmentation.hpp"
#include "mixsgcl/dataset.hpp"
#include "mixsgcl/evaluator.hpp"
#include "mixsgcl/linalg.hpp"
#include "mixsgcl/objectives.hpp"
#include "mixsgcl/propagation.hpp"
#include "mixsgcl/rng.hpp"
#include "mixsgcl/run_config.hpp"
#include "mixsgcl/trainer.hpp"

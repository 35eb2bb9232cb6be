#pragma once

#include "presgan/adam.hpp"
#include "presgan/checkpoint.hpp"
#include "presgan/config.hpp"
#include "presgan/errors.hpp"
#include "presgan/evaluator.hpp"
#include "presgan/hmc.hpp"
#include "presgan/io.hpp"
#include "presgan/linear_gaussian.hpp"
#include "presgan/mixture.hpp"
#include "presgan/mlp.hpp"
#include "presgan/models.hpp"
#include "presgan/param_vector.hpp"
#include "presgan/parallel.hpp"
#include "presgan/rng.hpp"
#include "presgan/tensor.hpp"
#include "presgan/trainer.hpp"

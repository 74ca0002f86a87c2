#pragma once

#include "quadrature.hpp"
#include "mesh.hpp"
#include "dg_field.hpp"
#include "ddg_operator.hpp"
#include "ks_model.hpp"
#include "limiters.hpp"
#include "linalg.hpp"
#include "stepper.hpp"
#include "config.hpp"
#include "io.hpp"
#include "experiments.hpp"

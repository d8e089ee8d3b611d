#pragma once

#include "rstparse/autodiff.hpp"
#include "rstparse/chart.hpp"
#include "rstparse/checkpoint.hpp"
#include "rstparse/core.hpp"
#include "rstparse/data.hpp"
#include "rstparse/encoder.hpp"
#include "rstparse/eval.hpp"
#include "rstparse/model.hpp"
#include "rstparse/training.hpp"
#include "rstparse/transition.hpp"
#include "rstparse/vocab.hpp"

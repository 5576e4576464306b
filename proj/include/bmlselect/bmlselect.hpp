#pragma once

#include "bmlselect/covariance.hpp"
#include "bmlselect/criteria.hpp"
#include "bmlselect/error.hpp"
#include "bmlselect/estimation.hpp"
#include "bmlselect/io.hpp"
#include "bmlselect/model_core.hpp"
#include "bmlselect/selection.hpp"
#include "bmlselect/simulation.hpp"

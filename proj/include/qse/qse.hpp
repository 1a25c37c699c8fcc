#pragma once

#include "qse/common.hpp"
#include "qse/ensemble.hpp"
#include "qse/estimator.hpp"
#include "qse/fock.hpp"
#include "qse/io.hpp"
#include "qse/likelihood.hpp"
#include "qse/measurement.hpp"
#include "qse/rng.hpp"

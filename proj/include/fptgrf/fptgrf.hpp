#pragma once

#include "fptgrf/csv.hpp"
#include "fptgrf/dataset.hpp"
#include "fptgrf/errors.hpp"
#include "fptgrf/estimator.hpp"
#include "fptgrf/experiments.hpp"
#include "fptgrf/forest.hpp"
#include "fptgrf/random.hpp"
#include "fptgrf/scores.hpp"
#include "fptgrf/serialization.hpp"
#include "fptgrf/simgen.hpp"
#include "fptgrf/splitting.hpp"
#include "fptgrf/tree.hpp"

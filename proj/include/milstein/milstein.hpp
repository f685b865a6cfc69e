#pragma once

#include "milstein/estimators.hpp"
#include "milstein/functionals.hpp"
#include "milstein/grid.hpp"
#include "milstein/iterated.hpp"
#include "milstein/lemmas.hpp"
#include "milstein/limits.hpp"
#include "milstein/model.hpp"
#include "milstein/montecarlo.hpp"
#include "milstein/parallel.hpp"
#include "milstein/paths.hpp"
#include "milstein/random.hpp"
#include "milstein/schemes.hpp"
#include "milstein/series.hpp"

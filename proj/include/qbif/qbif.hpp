#pragma once

#include "qbif/bifurcation.hpp"
#include "qbif/dimer_model.hpp"
#include "qbif/error.hpp"
#include "qbif/histogram.hpp"
#include "qbif/liouvillian.hpp"
#include "qbif/meanfield.hpp"
#include "qbif/parallel.hpp"
#include "qbif/spectrum.hpp"
#include "qbif/trajectories.hpp"

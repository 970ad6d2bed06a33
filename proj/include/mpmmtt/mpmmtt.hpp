#pragma once

// Core library: Eigen only.
#include "mpmmtt/assignment.hpp"
#include "mpmmtt/association.hpp"
#include "mpmmtt/filters.hpp"
#include "mpmmtt/hmm.hpp"
#include "mpmmtt/linalg.hpp"
#include "mpmmtt/log.hpp"
#include "mpmmtt/metrics.hpp"
#include "mpmmtt/models.hpp"
#include "mpmmtt/output.hpp"
#include "mpmmtt/simulator.hpp"
#include "mpmmtt/tracker.hpp"

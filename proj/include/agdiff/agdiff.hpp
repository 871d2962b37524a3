#pragma once

#include "agdiff/barenblatt.hpp"
#include "agdiff/config.hpp"
#include "agdiff/diagnostics.hpp"
#include "agdiff/domain.hpp"
#include "agdiff/dynamics.hpp"
#include "agdiff/error.hpp"
#include "agdiff/harness.hpp"
#include "agdiff/initial_data.hpp"
#include "agdiff/kernels.hpp"
#include "agdiff/nonlinearity.hpp"
#include "agdiff/oracle.hpp"
#include "agdiff/parallel.hpp"
#include "agdiff/particle_state.hpp"
#include "agdiff/trajectory.hpp"
#include "agdiff/validation.hpp"

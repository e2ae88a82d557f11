#pragma once

#include "icrm/beta.hpp"
#include "icrm/eval.hpp"
#include "icrm/io.hpp"
#include "icrm/model.hpp"
#include "icrm/objective.hpp"
#include "icrm/rng.hpp"
#include "icrm/specfun.hpp"
#include "icrm/synth.hpp"
#include "icrm/verify.hpp"

#pragma once

#include "aot/alignment.hpp"
#include "aot/dataset.hpp"
#include "aot/dominance.hpp"
#include "aot/empirical_measure.hpp"
#include "aot/numeric.hpp"
#include "aot/ot1d.hpp"
#include "aot/penalty.hpp"
#include "aot/policy.hpp"
#include "aot/soft_sort.hpp"
#include "aot/trainer.hpp"
#include "aot/version.hpp"

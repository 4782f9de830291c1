#pragma once

#include "mrhet/types.hpp"

namespace mrhet {

/// Four i.i.d. uniform draws on cfg.v_range (stream derived from cfg.seed).
/// A degenerate range lo == hi gives fixed offsets.
RandomEffects draw_random_effects(const SimConfig& cfg);

/// Simulates n_a fully observed study-A rows followed by n_b study-B rows.
/// Study-B exposures are generated with the V shifts, then masked; the
/// generated values stay in Row::masked and the draws of V in the truth record.
///
/// Per row: genotypes i.i.d. Binomial(2, maf_param), U ~ N(0,1), then
/// X1, X2, then Y1, Y2 from the structural equations with noise sd sigma_true.
CombinedDataset simulate_dataset(const SimConfig& cfg);

}  // namespace mrhet

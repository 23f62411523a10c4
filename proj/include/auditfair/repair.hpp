#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "auditfair/causal.hpp"
#include "auditfair/data.hpp"

namespace auditfair {

enum class FlipDirection : uint8_t {
  PosToNegYoung,  // Young callback amended to no-callback
  NegToPosOlder,  // Older no-callback amended to callback
  // mirrored run, used only when the observed gap favors Older
  PosToNegOlder,
  NegToPosYoung,
};
const char* to_string(FlipDirection d);

struct Flip {
  size_t record_index = 0;
  FlipDirection direction = FlipDirection::PosToNegYoung;
  double tau = 0;
};

struct RepairLog {
  std::vector<Flip> flips;  // two per iteration, in flip order
  size_t iterations = 0;
  double final_gap = 0;
  bool mirrored = false;
};

struct RepairResult {
  Dataset data;
  RepairLog log;
};

// Label repair: while the Young callback rate exceeds the Older rate by more
// than one paired flip's worth (1/n_young + 1/n_older), amend the Young
// positive with the largest tau_hat to 0 and the Older negative with the
// smallest tau_hat to 1. Ties break on the lower record index; a record is
// never flipped twice. If the gap favors Older, the same procedure runs
// mirrored. The input is left untouched.
RepairResult repair_labels_ite(const Dataset& data, const ITEScores& scores);

struct EbrResult {
  Dataset data;
  size_t removed = 0;
  bool noop_warning = false;  // set when the Older rate already >= Young rate
};

// Deletes uniformly random Older no-callback records until the Older rate
// first reaches or exceeds the Young rate.
EbrResult equalize_base_rate(const Dataset& data, uint64_t seed);

// Deletes uniformly random Older callback records until the Young-Older gap
// first reaches target_gap.
Dataset double_discrimination(const Dataset& data, double target_gap, uint64_t seed);

struct BiasTarget {
  double p_spanish_young = 0.5;
  double p_spanish_old = 0.5;
  bool preserve_spanish_callback_rate = true;  // always on; kept for config echo
};

// Deletes records so P(Spanish|Young) and P(Spanish|Older) hit the targets
// while the callback rate among Spanish speakers and among non-Spanish
// speakers each stays within 0.01 of its pre-sampling value. Deletions are
// allocated over the eight (age x spanish x callback) cells with the
// smallest total count that satisfies the constraints, then sampled
// uniformly within each cell.
Dataset inject_selection_bias(const Dataset& data, const BiasTarget& target, uint64_t seed);

void write_repair_log_csv(const RepairLog& log, std::ostream& out);
void write_repair_log_csv(const RepairLog& log, const std::string& path);

}  // namespace auditfair

#include "auditfair/repair.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "auditfair/rng.hpp"

namespace auditfair {

const char* to_string(FlipDirection d) {
  switch (d) {
    case FlipDirection::PosToNegYoung: return "pos_to_neg_young";
    case FlipDirection::NegToPosOlder: return "neg_to_pos_older";
    case FlipDirection::PosToNegOlder: return "pos_to_neg_older";
    case FlipDirection::NegToPosYoung: return "neg_to_pos_young";
  }
  return "?";
}

namespace {

// indices of group members with the given label, ordered so that consuming
// front-to-back visits tau in the wanted direction, ties by lowest index
std::vector<size_t> flip_pool(const Dataset& data, const ITEScores& scores, AgeGroup group,
                              int label, bool largest_tau_first) {
  std::vector<size_t> pool;
  for (size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    if (r.age_group == group && r.callback == label) pool.push_back(i);
  }
  std::sort(pool.begin(), pool.end(), [&](size_t a, size_t b) {
    if (scores.tau_hat[a] != scores.tau_hat[b])
      return largest_tau_first ? scores.tau_hat[a] > scores.tau_hat[b]
                               : scores.tau_hat[a] < scores.tau_hat[b];
    return a < b;
  });
  return pool;
}

}  // namespace

RepairResult repair_labels_ite(const Dataset& data, const ITEScores& scores) {
  if (scores.size() != data.size())
    raise(Errc::ShapeMismatch, "ITE scores cover " + std::to_string(scores.size()) +
                                   " records, dataset has " + std::to_string(data.size()));

  RepairResult result;
  result.data = data;
  Dataset& out = result.data;
  RepairLog& log = result.log;

  GroupCounts gc = group_counts(out);
  if (gc.young == 0 || gc.older == 0) {
    log.final_gap = gc.gap();
    return result;  // nothing comparable to equalize
  }

  const double ny = static_cast<double>(gc.young), no = static_cast<double>(gc.older);
  // one paired flip moves the gap by exactly this much; exact equality is
  // unreachable in general, so stop inside one pair of it
  const double tolerance = 1.0 / ny + 1.0 / no;

  double young_cb = static_cast<double>(gc.young_callbacks);
  double older_cb = static_cast<double>(gc.older_callbacks);
  auto gap = [&] { return young_cb / ny - older_cb / no; };

  log.mirrored = gap() < -tolerance;

  // advantaged group loses its highest-tau positives, disadvantaged group
  // gains its lowest-tau negatives (tau ordering mirrors with the gap sign)
  const AgeGroup adv = log.mirrored ? AgeGroup::Older : AgeGroup::Young;
  const AgeGroup dis = log.mirrored ? AgeGroup::Young : AgeGroup::Older;
  std::vector<size_t> adv_pos = flip_pool(out, scores, adv, 1, !log.mirrored);
  std::vector<size_t> dis_neg = flip_pool(out, scores, dis, 0, log.mirrored);
  const FlipDirection down_dir =
      log.mirrored ? FlipDirection::PosToNegOlder : FlipDirection::PosToNegYoung;
  const FlipDirection up_dir =
      log.mirrored ? FlipDirection::NegToPosYoung : FlipDirection::NegToPosOlder;

  size_t next_down = 0, next_up = 0;
  const double sign = log.mirrored ? -1.0 : 1.0;
  while (sign * gap() > tolerance) {
    if (next_down >= adv_pos.size() || next_up >= dis_neg.size()) {
      std::ostringstream msg;
      msg << "flip pool exhausted with residual gap " << gap();
      raise(Errc::ExhaustedCandidates, msg.str());
    }
    const size_t i = adv_pos[next_down++];
    out.records[i].callback = 0;
    log.flips.push_back({i, down_dir, scores.tau_hat[i]});
    const size_t j = dis_neg[next_up++];
    out.records[j].callback = 1;
    log.flips.push_back({j, up_dir, scores.tau_hat[j]});
    if (log.mirrored) {
      older_cb -= 1;
      young_cb += 1;
    } else {
      young_cb -= 1;
      older_cb += 1;
    }
    ++log.iterations;
  }

  log.final_gap = gap();
  if (log.iterations > 0) {
    out.provenance = Provenance::Resampled;
    std::ostringstream note;
    note << "repair_labels_ite iterations=" << log.iterations << " final_gap=" << log.final_gap
         << (log.mirrored ? " mirrored" : "");
    out.trail.push_back(note.str());
  }
  return result;
}

EbrResult equalize_base_rate(const Dataset& data, uint64_t seed) {
  EbrResult result;
  GroupCounts gc = group_counts(data);

  if (gc.older == 0 || gc.young == 0 || gc.older_rate() >= gc.young_rate()) {
    result.data = data;
    result.noop_warning = true;
    return result;
  }

  // deleting Older no-callback records leaves older_callbacks fixed; find the
  // smallest deletion count that lifts the Older rate to the Young rate
  std::vector<size_t> pool;
  for (size_t i = 0; i < data.size(); ++i)
    if (data.records[i].age_group == AgeGroup::Older && data.records[i].callback == 0)
      pool.push_back(i);

  if (pool.empty()) {
    // Older rate below Young yet nothing deletable
    result.data = data;
    result.noop_warning = true;
    return result;
  }

  const double young_rate = gc.young_rate();
  const double cb = static_cast<double>(gc.older_callbacks);
  size_t removals = pool.size();
  for (size_t m = 0; m <= pool.size(); ++m) {
    const double remaining = static_cast<double>(gc.older - m);
    if (remaining <= 0 || cb / remaining >= young_rate) {
      removals = m;
      break;
    }
  }

  if (removals == 0) {
    result.data = data;
    return result;
  }

  Rng rng = rng_stream(seed, "ebr");
  rng.shuffle(pool);
  std::vector<uint8_t> drop(data.size(), 0);
  for (size_t i = 0; i < removals; ++i) drop[pool[i]] = 1;
  std::vector<size_t> keep;
  keep.reserve(data.size() - removals);
  for (size_t i = 0; i < data.size(); ++i)
    if (!drop[i]) keep.push_back(i);

  result.data = subset(data, keep);
  result.removed = removals;
  result.data.provenance = Provenance::Resampled;
  result.data.trail.push_back("equalize_base_rate seed=" + std::to_string(seed) +
                              " removed=" + std::to_string(removals));
  return result;
}

Dataset double_discrimination(const Dataset& data, double target_gap, uint64_t seed) {
  GroupCounts gc = group_counts(data);
  const double current = gc.gap();
  if (target_gap < current)
    raise(Errc::InfeasibleTarget, "target gap " + std::to_string(target_gap) +
                                      " is below the current gap " + std::to_string(current) +
                                      "; deletion can only widen it");

  std::vector<size_t> pool;
  for (size_t i = 0; i < data.size(); ++i)
    if (data.records[i].age_group == AgeGroup::Older && data.records[i].callback == 1)
      pool.push_back(i);

  // removing an Older callback record shrinks both the Older callback count
  // and the group size
  const double young_rate = gc.young_rate();
  size_t removals = pool.size() + 1;
  for (size_t m = 0; m <= pool.size(); ++m) {
    const double remaining = static_cast<double>(gc.older - m);
    const double rate = remaining > 0 ? (static_cast<double>(gc.older_callbacks - m)) / remaining : 0.0;
    if (young_rate - rate >= target_gap) {
      removals = m;
      break;
    }
  }
  if (removals > pool.size())
    raise(Errc::InfeasibleTarget,
          "cannot reach gap " + std::to_string(target_gap) + " by deleting Older callbacks");
  if (removals == 0) return data;

  Rng rng = rng_stream(seed, "double-discrimination");
  rng.shuffle(pool);
  std::vector<uint8_t> drop(data.size(), 0);
  for (size_t i = 0; i < removals; ++i) drop[pool[i]] = 1;
  std::vector<size_t> keep;
  keep.reserve(data.size() - removals);
  for (size_t i = 0; i < data.size(); ++i)
    if (!drop[i]) keep.push_back(i);

  Dataset out = subset(data, keep);
  out.provenance = Provenance::Resampled;
  out.trail.push_back("double_discrimination seed=" + std::to_string(seed) + " target=" +
                      std::to_string(target_gap) + " removed=" + std::to_string(removals));
  return out;
}

// ---------------------------------------------------------------------------
// selection bias injection
// ---------------------------------------------------------------------------

namespace {

long round_half_away(double x) { return static_cast<long>(std::floor(x + 0.5)); }

struct Cell {
  std::vector<size_t> callback;     // record indices, per callback label
  std::vector<size_t> no_callback;
  size_t total() const { return callback.size() + no_callback.size(); }
};

// keep totals per (age, spanish) cell that hit the marginal target for one
// age group with the fewest deletions: the cell on the target's rich side is
// kept whole
void keep_totals_for_group(size_t n_spanish, size_t n_other, double target, long& keep_spanish,
                           long& keep_other) {
  const size_t total = n_spanish + n_other;
  if (total == 0) raise(Errc::InfeasibleTarget, "age group is empty");
  const double current = static_cast<double>(n_spanish) / static_cast<double>(total);
  if (target >= current) {
    if (target <= 0.0) {  // only reachable when n_spanish == 0
      keep_spanish = 0;
      keep_other = static_cast<long>(n_other);
      return;
    }
    keep_spanish = static_cast<long>(n_spanish);
    keep_other = target >= 1.0 ? 0
                               : std::min<long>(static_cast<long>(n_other),
                                                round_half_away(n_spanish * (1.0 - target) / target));
  } else {
    keep_other = static_cast<long>(n_other);
    keep_spanish = target <= 0.0 ? 0
                                 : std::min<long>(static_cast<long>(n_spanish),
                                                  round_half_away(n_other * target / (1.0 - target)));
  }
}

}  // namespace

Dataset inject_selection_bias(const Dataset& data, const BiasTarget& target, uint64_t seed) {
  if (target.p_spanish_young < 0 || target.p_spanish_young > 1 || target.p_spanish_old < 0 ||
      target.p_spanish_old > 1)
    raise(Errc::InvalidConfig, "Spanish marginal targets must lie in [0,1]");

  // cells[age][spanish]
  Cell cells[2][2];
  for (size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    Cell& c = cells[r.age_group == AgeGroup::Young ? 0 : 1][r.spanish ? 1 : 0];
    (r.callback ? c.callback : c.no_callback).push_back(i);
  }

  long keep[2][2];  // keep totals per (age, spanish)
  keep_totals_for_group(cells[0][1].total(), cells[0][0].total(), target.p_spanish_young,
                        keep[0][1], keep[0][0]);
  keep_totals_for_group(cells[1][1].total(), cells[1][0].total(), target.p_spanish_old, keep[1][1],
                        keep[1][0]);

  // per spanish pool, keep the pool's original callback rate by choosing how
  // many callbacks each cell retains; fully kept cells have no slack, so the
  // shrunken cell absorbs the adjustment
  long keep_cb[2][2];
  for (int sp = 0; sp < 2; ++sp) {
    const double pool_cb = static_cast<double>(cells[0][sp].callback.size() + cells[1][sp].callback.size());
    const double pool_total = static_cast<double>(cells[0][sp].total() + cells[1][sp].total());
    const long keep_pool = keep[0][sp] + keep[1][sp];
    if (pool_total == 0 || keep_pool == 0) {
      keep_cb[0][sp] = keep_cb[1][sp] = 0;
      continue;
    }
    const double rate = pool_cb / pool_total;
    long want_cb = round_half_away(rate * static_cast<double>(keep_pool));

    // proportional start per cell, then clamp into each cell's feasible box
    long cb[2];
    for (int a = 0; a < 2; ++a) {
      const Cell& c = cells[a][sp];
      const double cell_rate =
          c.total() == 0 ? 0.0
                         : static_cast<double>(c.callback.size()) / static_cast<double>(c.total());
      cb[a] = round_half_away(cell_rate * static_cast<double>(keep[a][sp]));
    }
    for (int a = 0; a < 2; ++a) {
      const Cell& c = cells[a][sp];
      const long lo = std::max<long>(0, keep[a][sp] - static_cast<long>(c.no_callback.size()));
      const long hi = std::min<long>(static_cast<long>(c.callback.size()), keep[a][sp]);
      cb[a] = std::clamp(cb[a], lo, hi);
    }
    // push the remaining difference into whichever cell has room
    long diff = want_cb - (cb[0] + cb[1]);
    for (int a = 0; a < 2 && diff != 0; ++a) {
      const Cell& c = cells[a][sp];
      const long lo = std::max<long>(0, keep[a][sp] - static_cast<long>(c.no_callback.size()));
      const long hi = std::min<long>(static_cast<long>(c.callback.size()), keep[a][sp]);
      const long adjusted = std::clamp(cb[a] + diff, lo, hi);
      diff -= adjusted - cb[a];
      cb[a] = adjusted;
    }
    if (diff != 0)
      raise(Errc::InfeasibleTarget,
            "cannot hold the callback rate of the " + std::string(sp ? "Spanish" : "non-Spanish") +
                " pool at its original value under these marginal targets");
    keep_cb[0][sp] = cb[0];
    keep_cb[1][sp] = cb[1];
  }

  // sample the kept records uniformly within each (age, spanish, callback) cell
  Rng rng = rng_stream(seed, "inject-selection-bias");
  std::vector<uint8_t> kept(data.size(), 0);
  for (int a = 0; a < 2; ++a) {
    for (int sp = 0; sp < 2; ++sp) {
      Cell& c = cells[a][sp];
      const long want_cb = keep_cb[a][sp];
      const long want_ncb = keep[a][sp] - want_cb;
      if (want_ncb < 0 || static_cast<size_t>(want_cb) > c.callback.size() ||
          static_cast<size_t>(want_ncb) > c.no_callback.size())
        raise(Errc::InfeasibleTarget, "cell allocation out of range");
      rng.shuffle(c.callback);
      rng.shuffle(c.no_callback);
      for (long i = 0; i < want_cb; ++i) kept[c.callback[static_cast<size_t>(i)]] = 1;
      for (long i = 0; i < want_ncb; ++i) kept[c.no_callback[static_cast<size_t>(i)]] = 1;
    }
  }
  std::vector<size_t> keep_rows;
  for (size_t i = 0; i < data.size(); ++i)
    if (kept[i]) keep_rows.push_back(i);
  if (keep_rows.empty()) raise(Errc::InfeasibleTarget, "targets delete the entire dataset");
  if (keep_rows.size() == data.size()) return data;

  Dataset out = subset(data, keep_rows);
  out.provenance = Provenance::Resampled;
  {
    std::ostringstream note;
    note << "inject_selection_bias seed=" << seed << " p_sp_young=" << target.p_spanish_young
         << " p_sp_old=" << target.p_spanish_old << " removed=" << (data.size() - keep_rows.size());
    out.trail.push_back(note.str());
  }
  return out;
}

void write_repair_log_csv(const RepairLog& log, std::ostream& out) {
  out.precision(17);
  out << "order,record_index,direction,tau_hat\n";
  for (size_t i = 0; i < log.flips.size(); ++i) {
    const Flip& f = log.flips[i];
    out << i << ',' << f.record_index << ',' << to_string(f.direction) << ',' << f.tau << "\n";
  }
}

void write_repair_log_csv(const RepairLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  write_repair_log_csv(log, out);
}

}  // namespace auditfair

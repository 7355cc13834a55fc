#pragma once

#include <span>
#include <string>
#include <vector>

#include "terrafuse/terrafeat.hpp"

namespace terrafuse {

struct CusumParams {
  double k = 0.5;   // drift allowance, in standard deviations
  double h = 5.0;   // alarm threshold, in standard deviations
  int warmup = 20;  // samples used to estimate the pre-change statistics
  bool one_sided = false;  // only upward shifts when set

  void validate() const;
};

// Two-sided CUSUM on standardized residuals. The reference mean and
// standard deviation come from the first `warmup` samples and keep adapting
// afterwards until either sum passes h/2, at which point they freeze.
class CusumState {
 public:
  explicit CusumState(const CusumParams& params = {});

  // Returns true when the sample raises an alarm. Throws invalid-sample for
  // non-finite input.
  bool update(double x);
  // Back to the unwarmed initial state.
  void reset();

  int n() const { return n_; }
  bool warmed_up() const { return n_ >= params_.warmup; }
  bool frozen() const { return frozen_; }
  double running_mean() const { return mean_; }
  double running_std() const;  // sample (n-1) estimate
  double s_plus() const { return s_plus_; }
  double s_minus() const { return s_minus_; }
  const CusumParams& params() const { return params_; }

 private:
  void absorb(double x);

  CusumParams params_;
  int n_ = 0;           // samples seen since the last reset
  int stats_n_ = 0;     // samples folded into the reference statistics
  double mean_ = 0.0;
  double m2_ = 0.0;
  bool frozen_ = false;
  double s_plus_ = 0.0;
  double s_minus_ = 0.0;
};

// Free-function form of CusumState::update.
bool cusum_update(CusumState& state, double x);

struct ChangeEvent {
  double t = 0.0;
  std::string feature;
  double s_plus = 0.0;
  double s_minus = 0.0;
  double h = 0.0;

  bool operator==(const ChangeEvent&) const = default;
};

// One detector per feature column. Rows whose group is flagged, and
// non-finite values, are skipped for that column. After an alarm the
// column's detector restarts from scratch. Events are sorted by time, then
// by column order.
std::vector<ChangeEvent> detect_changes(std::span<const FeatureVector> stream,
                                        const CusumParams& params);

}  // namespace terrafuse

#include "terrafuse/cusum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "terrafuse/error.hpp"

namespace terrafuse {

void CusumParams::validate() const {
  if (!(h > 0.0)) fail(ErrorCode::kInvalidArgument, "CUSUM threshold h must be positive");
  if (!(k >= 0.0)) fail(ErrorCode::kInvalidArgument, "CUSUM drift k must be non-negative");
  if (warmup < 2) fail(ErrorCode::kInvalidArgument, "CUSUM warmup must be at least 2");
}

CusumState::CusumState(const CusumParams& params) : params_(params) {
  params_.validate();
}

void CusumState::reset() { *this = CusumState(params_); }

double CusumState::running_std() const {
  return stats_n_ > 1 ? std::sqrt(m2_ / (stats_n_ - 1)) : 0.0;
}

void CusumState::absorb(double x) {
  ++stats_n_;
  const double delta = x - mean_;
  mean_ += delta / stats_n_;
  m2_ += delta * (x - mean_);
}

bool CusumState::update(double x) {
  if (!std::isfinite(x)) fail(ErrorCode::kInvalidSample, "CUSUM sample is not finite");
  if (n_ < params_.warmup) {
    ++n_;
    absorb(x);
    return false;
  }
  ++n_;
  const double eps = (x - mean_) / std::max(running_std(), 1e-12);
  s_plus_ = std::max(0.0, s_plus_ + eps - params_.k);
  s_minus_ = params_.one_sided ? 0.0 : std::max(0.0, s_minus_ - eps - params_.k);
  const double peak = std::max(s_plus_, s_minus_);
  if (!frozen_) {
    if (peak > 0.5 * params_.h) {
      frozen_ = true;
    } else {
      absorb(x);
    }
  }
  return peak > params_.h;
}

bool cusum_update(CusumState& state, double x) { return state.update(x); }

std::vector<ChangeEvent> detect_changes(std::span<const FeatureVector> stream,
                                        const CusumParams& params) {
  params.validate();
  for (std::size_t i = 1; i < stream.size(); ++i) {
    if (!(stream[i].t_mid >= stream[i - 1].t_mid)) {
      std::ostringstream msg;
      msg << "feature stream not time-ordered at row " << i << " (t=" << stream[i].t_mid << ")";
      fail(ErrorCode::kInvalidStream, msg.str());
    }
  }
  const auto& names = feature_names();
  std::vector<CusumState> states(kFeatureCount, CusumState(params));
  std::vector<ChangeEvent> events;
  for (const FeatureVector& row : stream) {
    for (int c = 0; c < kFeatureCount; ++c) {
      const double x = row.values[c];
      if (row.flagged(feature_group(c)) || !std::isfinite(x)) continue;
      CusumState& st = states[c];
      if (st.update(x)) {
        events.push_back({row.t_mid, names[c], st.s_plus(), st.s_minus(), params.h});
        st.reset();
      }
    }
  }
  return events;
}

}  // namespace terrafuse

#pragma once

// Penalized choice of the number of clusters: penalty shapes, data-driven
// slope estimation (DDSE) and the penalized argmin.

#include "tsclust/common.hpp"

#include <filesystem>
#include <string_view>

namespace tsclust {

enum class Penalty { Spherical, FullGmm };

Penalty parse_penalty(std::string_view name);
std::string_view to_string(Penalty penalty);

/// pen(k) = d k: free parameters of k spherical means.
double penalty_spherical(int k, int d);

/// pen(k) = (d^2/2 + 3d/2 + 1) k - 1: free parameters of a full-covariance mixture.
double penalty_gmm_full(int k, int d);

double penalty_value(Penalty penalty, int k, int d);

struct TraceRecord {
    int k = 0;
    /// Per-series log-likelihood l_n / n of the best fit with k clusters.
    double loglik = 0.0;
    double pen = 0.0;
    double seconds = 0.0;
};

/// One record per candidate k, in strictly increasing k.
class SelectionTrace {
public:
    void add(const TraceRecord& record);

    const std::vector<TraceRecord>& records() const { return records_; }
    std::vector<int> candidates() const;
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    /// Copy with the pen column recomputed for `penalty` at dimension d.
    SelectionTrace with_penalty(Penalty penalty, int d) const;

private:
    std::vector<TraceRecord> records_;
};

struct WindowSlope {
    int first_k = 0;
    int last_k = 0;
    double slope = 0.0;
};

struct SlopeEstimate {
    double kappa = 0.0;
    int window_first_k = 0;
    int window_last_k = 0;
    std::vector<WindowSlope> diagnostics;
};

/// DDSE. The per-series log-likelihood is regressed on pen(k) over windows
/// made of the largest models: every window ends at the largest k and holds
/// at least max(4, ceil(K/2)) candidates. Runs of consecutive windows whose
/// slopes differ by less than 5% (relative) are stable; the longest run wins
/// (ties go to the run of larger models) and kappa is the slope of the
/// longest window in it.
///
/// Throws ValidationError with fewer than 4 candidates and NumericalError when
/// the slope is not positive (the likelihood has not reached its linear regime).
SlopeEstimate estimate_slope_ddse(const SelectionTrace& trace);

/// argmin_k  -loglik_k + 2 kappa pen(k); ties go to the smaller k.
int select_k(const SelectionTrace& trace, double kappa);

/// CSV with header `k,loglik,pen,seconds`.
void write_trace_csv(const SelectionTrace& trace, const std::filesystem::path& path);
SelectionTrace read_trace_csv(const std::filesystem::path& path);

}  // namespace tsclust

#include "tsclust/selection.hpp"

#include "csv.hpp"

#include <cmath>
#include <string>

namespace tsclust {

Penalty parse_penalty(std::string_view name)
{
    if (name == "spherical") return Penalty::Spherical;
    if (name == "full") return Penalty::FullGmm;
    throw ValidationError("unknown penalty '" + std::string(name) + "' (expected spherical or full)");
}

std::string_view to_string(Penalty penalty)
{
    return penalty == Penalty::Spherical ? "spherical" : "full";
}

double penalty_spherical(int k, int d)
{
    require(k >= 1 && d >= 1, "penalty needs k >= 1 and d >= 1");
    return static_cast<double>(d) * static_cast<double>(k);
}

double penalty_gmm_full(int k, int d)
{
    require(k >= 1 && d >= 1, "penalty needs k >= 1 and d >= 1");
    const auto dd = static_cast<double>(d);
    return (dd * dd / 2.0 + 3.0 * dd / 2.0 + 1.0) * static_cast<double>(k) - 1.0;
}

double penalty_value(Penalty penalty, int k, int d)
{
    return penalty == Penalty::Spherical ? penalty_spherical(k, d) : penalty_gmm_full(k, d);
}

void SelectionTrace::add(const TraceRecord& record)
{
    require(record.k >= 1, "trace records need k >= 1");
    require(records_.empty() || record.k > records_.back().k, "trace k values must be strictly increasing");
    require(std::isfinite(record.loglik) && std::isfinite(record.pen), "trace values must be finite");
    records_.push_back(record);
}

std::vector<int> SelectionTrace::candidates() const
{
    std::vector<int> ks;
    ks.reserve(records_.size());
    for (const auto& r : records_) ks.push_back(r.k);
    return ks;
}

SelectionTrace SelectionTrace::with_penalty(Penalty penalty, int d) const
{
    SelectionTrace out;
    for (TraceRecord r : records_) {
        r.pen = penalty_value(penalty, r.k, d);
        out.add(r);
    }
    return out;
}

namespace {

double ols_slope(const std::vector<TraceRecord>& records, std::size_t first)
{
    const std::size_t count = records.size() - first;
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = first; i < records.size(); ++i) {
        mean_x += records[i].pen;
        mean_y += records[i].loglik;
    }
    mean_x /= static_cast<double>(count);
    mean_y /= static_cast<double>(count);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = first; i < records.size(); ++i) {
        const double dx = records[i].pen - mean_x;
        sxy += dx * (records[i].loglik - mean_y);
        sxx += dx * dx;
    }
    if (!(sxx > 0.0)) throw ValidationError("penalty values in a DDSE window are all equal");
    return sxy / sxx;
}

}  // namespace

SlopeEstimate estimate_slope_ddse(const SelectionTrace& trace)
{
    const auto& recs = trace.records();
    const std::size_t count = recs.size();
    require(count >= 4, "DDSE needs at least 4 candidate values of k");

    const std::size_t min_len = std::max<std::size_t>(4, (count + 1) / 2);
    const std::size_t last_start = count - min_len;

    SlopeEstimate est;
    std::vector<double> slopes(last_start + 1);
    for (std::size_t s = 0; s <= last_start; ++s) {
        slopes[s] = ols_slope(recs, s);
        est.diagnostics.push_back({recs[s].k, recs.back().k, slopes[s]});
    }

    // Walk from the shortest window (largest models) toward longer ones.
    std::size_t best_lo = last_start;
    std::size_t best_len = 1;
    std::size_t run_lo = last_start;
    std::size_t run_len = 1;
    for (std::size_t s = last_start; s-- > 0;) {
        const double ref = slopes[s + 1];
        const bool stable = std::abs(slopes[s] - ref) < 0.05 * std::abs(ref);
        if (stable) {
            run_lo = s;
            ++run_len;
        } else {
            run_lo = s;
            run_len = 1;
        }
        if (run_len > best_len) {
            best_len = run_len;
            best_lo = run_lo;
        }
    }

    est.kappa = slopes[best_lo];
    est.window_first_k = recs[best_lo].k;
    est.window_last_k = recs.back().k;
    if (!(est.kappa > 0.0))
        throw NumericalError("DDSE slope is not positive (" + csv::format(est.kappa) +
                             "); the likelihood is not yet linear in the penalty, extend the candidate set");
    return est;
}

int select_k(const SelectionTrace& trace, double kappa)
{
    require(!trace.empty(), "model selection needs a nonempty trace");
    require(kappa > 0.0 && std::isfinite(kappa), "slope kappa must be positive");
    const auto& recs = trace.records();
    std::size_t best = 0;
    double best_crit = -recs[0].loglik + 2.0 * kappa * recs[0].pen;
    for (std::size_t i = 1; i < recs.size(); ++i) {
        const double crit = -recs[i].loglik + 2.0 * kappa * recs[i].pen;
        if (crit < best_crit) {
            best_crit = crit;
            best = i;
        }
    }
    return recs[best].k;
}

void write_trace_csv(const SelectionTrace& trace, const std::filesystem::path& path)
{
    auto out = csv::open_out(path);
    out << "k,loglik,pen,seconds\n";
    for (const auto& r : trace.records())
        out << r.k << ',' << csv::format(r.loglik) << ',' << csv::format(r.pen) << ',' << csv::format(r.seconds)
            << '\n';
    if (!out) throw ValidationError("failed writing " + path.string());
}

SelectionTrace read_trace_csv(const std::filesystem::path& path)
{
    auto in = csv::open_in(path);
    std::string line;
    const std::string ctx = path.string();
    if (!std::getline(in, line)) throw ValidationError(ctx + ": empty trace file");
    const auto header = csv::split(line);
    if (header.size() != 4 || header[0] != "k" || header[1] != "loglik" || header[2] != "pen" ||
        header[3] != "seconds")
        throw ValidationError(ctx + ": trace header must be k,loglik,pen,seconds");
    SelectionTrace trace;
    while (std::getline(in, line)) {
        if (csv::trim(line).empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != 4) throw ValidationError(ctx + ": trace rows need 4 fields");
        TraceRecord r;
        r.k = static_cast<int>(csv::parse_int(cells[0], ctx));
        r.loglik = csv::parse_double(cells[1], ctx);
        r.pen = csv::parse_double(cells[2], ctx);
        r.seconds = csv::parse_double(cells[3], ctx);
        trace.add(r);
    }
    return trace;
}

}  // namespace tsclust

#pragma once

#include "dirac/degrade.hpp"
#include "dirac/io.hpp"
#include "dirac/severity.hpp"

#include <functional>
#include <limits>
#include <span>
#include <sstream>

namespace dirac {

/// Pairwise image dissimilarity used to compare degradation severities.
struct Metric {
    std::string name;
    std::function<double(const Signal&, const Signal&)> fn;

    static Metric rmse() { return {"rmse", [](const Signal& a, const Signal& b) { return dirac::rmse(a, b); }}; }
    static Metric mse() { return {"mse", [](const Signal& a, const Signal& b) { return dirac::mse(a, b); }}; }

    static Metric by_name(const std::string& name) {
        if (name == "rmse") return rmse();
        if (name == "mse") return mse();
        throw std::invalid_argument("unknown metric '" + name + "' (expected rmse or mse)");
    }
};

/// Dataset-averaged metric between A_{t_i}(x) and A_{t_j}(x).
inline double pairwise_distance(const DegradationProcess& proc, double t_i, double t_j, std::span<const Signal> dataset,
                                const Metric& metric) {
    if (dataset.empty()) throw std::invalid_argument("pairwise_distance: empty dataset");
    double sum = 0.0;
    for (const Signal& x : dataset) sum += metric.fn(proc.apply(t_i, x), proc.apply(t_j, x));
    return sum / static_cast<double>(dataset.size());
}

/// Symmetric table of pairwise distances between N candidate severities
/// spread uniformly over [0,1], with the operator parameter at each candidate.
struct DistanceTable {
    std::vector<double> candidates;
    std::vector<double> params;
    Matrix d;
    std::string metric_name;

    std::size_t size() const { return candidates.size(); }

    void validate() const {
        const auto n = static_cast<Eigen::Index>(candidates.size());
        if (n < 2 || d.rows() != n || d.cols() != n || params.size() != candidates.size()) {
            throw std::invalid_argument("distance table: inconsistent sizes");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (d(i, i) != 0.0) throw std::invalid_argument("distance table: non-zero diagonal");
            for (Eigen::Index j = 0; j < n; ++j) {
                if (d(i, j) < 0.0 || d(i, j) != d(j, i)) throw std::invalid_argument("distance table: must be symmetric and non-negative");
            }
        }
    }
};

inline std::vector<double> uniform_candidates(std::size_t n) {
    if (n < 2) throw std::invalid_argument("need at least two candidate severities");
    std::vector<double> ts(n);
    for (std::size_t i = 0; i < n; ++i) ts[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    ts.back() = 1.0;
    return ts;
}

inline DistanceTable build_distance_table(const DegradationProcess& proc, std::size_t candidates,
                                          std::span<const Signal> dataset, const Metric& metric, std::size_t jobs = 1) {
    if (dataset.empty()) throw std::invalid_argument("build_distance_table: empty dataset");
    DistanceTable table;
    table.candidates = uniform_candidates(candidates);
    table.metric_name = metric.name;
    const auto n = static_cast<Eigen::Index>(candidates);
    table.d = Matrix::Zero(n, n);
    for (double t : table.candidates) table.params.push_back(proc.param_of(t));

    // degrade the dataset once per candidate, then fill rows in parallel
    std::vector<std::vector<Signal>> degraded(candidates);
    parallel_for(candidates, jobs, [&](std::size_t i) {
        degraded[i].reserve(dataset.size());
        for (const Signal& x : dataset) degraded[i].push_back(proc.apply(table.candidates[i], x));
    });
    parallel_for(candidates, jobs, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < candidates; ++j) {
            double sum = 0.0;
            for (std::size_t s = 0; s < dataset.size(); ++s) sum += metric.fn(degraded[i][s], degraded[j][s]);
            table.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sum / static_cast<double>(dataset.size());
        }
    });
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) table.d(i, j) = table.d(j, i);
    }
    return table;
}

/// Largest distance between consecutive selected candidate indices.
inline double max_edge_distance(const DistanceTable& table, std::span<const std::size_t> selected) {
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < selected.size(); ++i) {
        best = std::max(best, table.d(static_cast<Eigen::Index>(selected[i]), static_cast<Eigen::Index>(selected[i + 1])));
    }
    return best;
}

/// m interior indices spread as evenly as the candidate grid allows.
inline std::vector<std::size_t> uniform_selection(std::size_t candidates, std::size_t m) {
    std::vector<std::size_t> s;
    for (std::size_t k = 0; k <= m + 1; ++k) {
        s.push_back(static_cast<std::size_t>(std::lround(static_cast<double>(k) * static_cast<double>(candidates - 1) /
                                                         static_cast<double>(m + 1))));
    }
    return s;
}

struct GreedyResult {
    std::vector<std::size_t> selected;   // sorted candidate indices, endpoints included
    std::vector<double> max_edge_trace;  // max edge after 0..m insertions
    SeveritySchedule schedule;
    bool degenerate = false;            // table was all zeros; uniform knots returned
    int non_improving_splits = 0;        // splits that could not lower the split edge
};

/// Knots that place the selected candidates at equally spaced new severities
/// k/(m+1), interpolating linearly in between.
inline SeveritySchedule schedule_from_selection(const DistanceTable& table, std::span<const std::size_t> selected) {
    std::vector<Knot> knots;
    const double segments = static_cast<double>(selected.size() - 1);
    for (std::size_t k = 0; k < selected.size(); ++k) {
        const double t = k + 1 == selected.size() ? 1.0 : static_cast<double>(k) / segments;
        knots.push_back({t, table.params[selected[k]]});
    }
    return SeveritySchedule(std::move(knots));
}

namespace detail {

struct Edge {
    std::size_t start;
    std::size_t end;
    double distance;
};

// Maximum-distance edge among edges that still contain an interior candidate;
// the first one encountered wins ties.
inline std::optional<Edge> max_splittable_edge(const DistanceTable& table, const std::vector<std::size_t>& s) {
    std::optional<Edge> best;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i + 1] - s[i] < 2) continue;
        const double d = table.d(static_cast<Eigen::Index>(s[i]), static_cast<Eigen::Index>(s[i + 1]));
        if (!best || d > best->distance) best = Edge{s[i], s[i + 1], d};
    }
    return best;
}

}  // namespace detail

/// Greedy min-max degradation scheduling: start from the two endpoint
/// candidates, then m times split the current maximum-distance edge at the
/// interior candidate minimizing the larger of the two new edge distances
/// (smallest index wins ties).
inline GreedyResult greedy_schedule(const DistanceTable& table, std::size_t m) {
    table.validate();
    const std::size_t n = table.size();
    if (m + 2 > n) throw std::invalid_argument("greedy_schedule: m must be <= N - 2");

    GreedyResult result{{}, {}, SeveritySchedule::linear(0.0, 1.0), false, 0};
    if (table.d.cwiseAbs().maxCoeff() == 0.0) {
        result.selected = uniform_selection(n, m);
        result.degenerate = true;
        result.max_edge_trace.assign(m + 1, 0.0);
        result.schedule = schedule_from_selection(table, result.selected);
        return result;
    }

    std::vector<std::size_t> s{0, n - 1};
    result.max_edge_trace.push_back(max_edge_distance(table, s));
    for (std::size_t iter = 0; iter < m; ++iter) {
        const auto edge = detail::max_splittable_edge(table, s);
        if (!edge) throw std::logic_error("greedy_schedule: no splittable edge left");
        double best = std::numeric_limits<double>::infinity();
        std::size_t split = edge->start + 1;
        for (std::size_t j = edge->start + 1; j < edge->end; ++j) {
            const double d1 = table.d(static_cast<Eigen::Index>(edge->start), static_cast<Eigen::Index>(j));
            const double d2 = table.d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(edge->end));
            const double worst = std::max(d1, d2);
            if (worst < best) {
                best = worst;
                split = j;
            }
        }
        if (!(best < edge->distance)) ++result.non_improving_splits;
        s.insert(std::upper_bound(s.begin(), s.end(), split), split);
        result.max_edge_trace.push_back(max_edge_distance(table, s));
    }
    result.selected = s;
    result.schedule = schedule_from_selection(table, s);
    return result;
}

/// Number of (knot, new position) moves of a single interior knot that
/// strictly lower the maximum edge distance. Zero means locally optimal.
inline int local_improvements(const DistanceTable& table, std::span<const std::size_t> selected) {
    const double current = max_edge_distance(table, selected);
    int count = 0;
    std::vector<std::size_t> s(selected.begin(), selected.end());
    for (std::size_t k = 1; k + 1 < s.size(); ++k) {
        const std::size_t original = s[k];
        for (std::size_t pos = s[k - 1] + 1; pos < s[k + 1]; ++pos) {
            if (pos == original) continue;
            s[k] = pos;
            if (max_edge_distance(table, s) < current) ++count;
        }
        s[k] = original;
    }
    return count;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

/// Header `# process=<name> metric=<name> N=<N> m=<m>` followed by one
/// `t w` line per knot with 9 significant digits.
inline std::string encode_schedule(const SeveritySchedule& schedule, const std::string& process, const std::string& metric,
                                   std::size_t candidates, std::size_t m) {
    std::string out = "# process=" + process + " metric=" + metric + " N=" + std::to_string(candidates) +
                      " m=" + std::to_string(m) + "\n";
    for (const Knot& k : schedule.knots()) out += io::format_real(k.t) + " " + io::format_real(k.w) + "\n";
    return out;
}

struct ScheduleFile {
    std::string process;
    std::string metric;
    std::size_t candidates = 0;
    std::size_t m = 0;
    SeveritySchedule schedule = SeveritySchedule::linear(0.0, 1.0);
};

inline ScheduleFile decode_schedule(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw std::runtime_error("schedule file: missing header");
    ScheduleFile file;
    std::istringstream header(line.substr(2));
    std::string field;
    while (header >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw std::runtime_error("schedule file: malformed header field '" + field + "'");
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        if (key == "process") file.process = value;
        else if (key == "metric") file.metric = value;
        else if (key == "N") file.candidates = std::stoul(value);
        else if (key == "m") file.m = std::stoul(value);
        else throw std::runtime_error("schedule file: unknown header field '" + key + "'");
    }
    std::vector<Knot> knots;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        Knot k{};
        if (!(row >> k.t >> k.w)) throw std::runtime_error("schedule file: malformed row '" + line + "'");
        knots.push_back(k);
    }
    file.schedule = SeveritySchedule(std::move(knots));
    return file;
}

inline std::string encode_distance_table(const DistanceTable& table) {
    std::string out = "# metric=" + table.metric_name + " N=" + std::to_string(table.size()) + "\n";
    for (Eigen::Index i = 0; i < table.d.rows(); ++i) {
        for (Eigen::Index j = 0; j < table.d.cols(); ++j) {
            if (j > 0) out += ' ';
            out += io::format_real(table.d(i, j));
        }
        out += '\n';
    }
    return out;
}

}  // namespace dirac

#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "npprov/errors.hpp"
#include "npprov/gp.hpp"
#include "npprov/io.hpp"
#include "npprov/kernels.hpp"
#include "npprov/rng.hpp"
#include "npprov/tensor.hpp"

namespace npprov {

// One few-shot regression problem. Context and target come from a single
// underlying function draw.
struct Task {
    Tensor x_context, y_context;  // [N]
    Tensor x_target, y_target;    // [M]
};

enum class TaskDomain { Synthetic, SmartMeter };

struct TaskConfig {
    double x_low = -2.0, x_high = 2.0;
    int n_points_low = 3, n_points_high = 50;
    int batch_size = 16;
    int tasks_per_epoch = 256;
    uint64_t base_seed = 0;
    TaskDomain domain = TaskDomain::Synthetic;
};

namespace taskdetail {

inline void check_config(const TaskConfig& cfg) {
    if (!(cfg.x_low < cfg.x_high)) throw ContractViolation("TaskConfig: x_low must be < x_high");
    if (cfg.n_points_low < 1 || cfg.n_points_high < cfg.n_points_low)
        throw ContractViolation("TaskConfig: bad point-count range");
}

inline Task split_joint(const std::vector<double>& xs, const Tensor& ys, int64_t n) {
    const int64_t total = static_cast<int64_t>(xs.size());
    Task t;
    t.x_context = Tensor({n});
    t.y_context = Tensor({n});
    t.x_target = Tensor({total - n});
    t.y_target = Tensor({total - n});
    for (int64_t i = 0; i < n; ++i) {
        t.x_context[i] = xs[static_cast<size_t>(i)];
        t.y_context[i] = ys[i];
    }
    for (int64_t i = n; i < total; ++i) {
        t.x_target[i - n] = xs[static_cast<size_t>(i)];
        t.y_target[i - n] = ys[i];
    }
    return t;
}

}  // namespace taskdetail

// Positions uniform on [x_low, x_high]; one joint prior draw supplies every
// value, so context and target are views of the same function.
inline Task sample_synthetic_task(KernelSpec spec, const TaskConfig& cfg, uint64_t task_index) {
    taskdetail::check_config(cfg);
    CounterRng counts(cfg.base_seed, task_index, rng_stream::kCounts);
    const int64_t n = counts.uniform_int(cfg.n_points_low, cfg.n_points_high);
    const int64_t m = counts.uniform_int(cfg.n_points_low, cfg.n_points_high);
    CounterRng pos(cfg.base_seed, task_index, rng_stream::kPositions);
    std::vector<double> xs(static_cast<size_t>(n + m));
    for (auto& x : xs) x = pos.uniform(cfg.x_low, cfg.x_high);
    const Tensor ys = gp_sample(spec, Tensor::from(xs), hash_mix(hash_mix(cfg.base_seed, task_index), rng_stream::kGpSample));
    return taskdetail::split_joint(xs, ys, n);
}

// ---- Smart Meter ----

// timestamps in days since the first reading, strictly ascending
struct SmartMeterSeries {
    std::vector<double> timestamps;
    std::vector<double> readings;  // kWh per half-hour
};

namespace taskdetail {

// Howard Hinnant's days-from-civil; valid across the Gregorian calendar
inline int64_t days_from_civil(int64_t y, int64_t m, int64_t d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const int64_t yoe = y - era * 400;
    const int64_t doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

inline bool parse_iso_timestamp(const std::string& s, double& epoch_seconds) {
    int y, mo, d, h, mi, se;
    char tail;
    if (std::sscanf(s.c_str(), "%d-%d-%d %d:%d:%d%c", &y, &mo, &d, &h, &mi, &se, &tail) != 6) return false;
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || se < 0 || se > 59)
        return false;
    epoch_seconds = static_cast<double>(days_from_civil(y, mo, d)) * 86400.0 + h * 3600.0 + mi * 60.0 + se;
    return true;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace taskdetail

// CSV with a header row naming `timestamp` (ISO-8601) and `energy_kwh_hh`
// columns. Rows whose reading cell is `Null` are dropped; out-of-order rows
// are sorted; duplicate timestamps are rejected.
inline SmartMeterSeries load_smart_meter(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw EmptyDataError("'" + path + "' has no header row");
    const auto header = taskdetail::split_csv_line(line);
    int ts_col = -1, kwh_col = -1;
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "timestamp") ts_col = static_cast<int>(i);
        if (header[i] == "energy_kwh_hh") kwh_col = static_cast<int>(i);
    }
    if (ts_col < 0 || kwh_col < 0)
        throw ParseError("'" + path + "': header must name timestamp and energy_kwh_hh columns");

    std::vector<std::pair<double, double>> rows;  // (epoch seconds, reading)
    int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = taskdetail::split_csv_line(line);
        if (static_cast<int>(cells.size()) <= std::max(ts_col, kwh_col))
            throw ParseError("line " + std::to_string(line_no) + ": too few columns");
        const std::string& reading = cells[static_cast<size_t>(kwh_col)];
        if (reading == "Null") continue;  // missing reading, row dropped
        double epoch;
        if (!taskdetail::parse_iso_timestamp(cells[static_cast<size_t>(ts_col)], epoch))
            throw ParseError("line " + std::to_string(line_no) + ": bad timestamp '" +
                             cells[static_cast<size_t>(ts_col)] + "'");
        char* end = nullptr;
        const double kwh = std::strtod(reading.c_str(), &end);
        if (end == reading.c_str() || *end != '\0')
            throw ParseError("line " + std::to_string(line_no) + ": bad reading '" + reading + "'");
        if (kwh < 0.0) throw ParseError("line " + std::to_string(line_no) + ": negative reading");
        rows.emplace_back(epoch, kwh);
    }
    if (rows.empty()) throw EmptyDataError("'" + path + "' holds no usable readings");
    std::sort(rows.begin(), rows.end());
    for (size_t i = 1; i < rows.size(); ++i)
        if (rows[i].first == rows[i - 1].first)
            throw ParseError("duplicate timestamp at sorted row " + std::to_string(i));
    SmartMeterSeries s;
    const double t0 = rows.front().first;
    for (const auto& [epoch, kwh] : rows) {
        s.timestamps.push_back((epoch - t0) / 86400.0);
        s.readings.push_back(kwh);
    }
    return s;
}

// Random 2-day clip mapped affinely onto x in [0, 2]; points subsampled
// without replacement. Retries fresh clips when a window is too sparse.
inline Task sample_smartmeter_task(const SmartMeterSeries& series, const TaskConfig& cfg, uint64_t task_index) {
    taskdetail::check_config(cfg);
    if (series.timestamps.size() < 2 || series.timestamps.back() - series.timestamps.front() < 2.0)
        throw DegenerateInput("smart-meter series must span at least 2 days");
    const double t_first = series.timestamps.front();
    const double t_last = series.timestamps.back();
    CounterRng clip(cfg.base_seed, task_index, rng_stream::kClip);

    for (int attempt = 0; attempt < 100; ++attempt) {
        const double start = clip.uniform(t_first, t_last - 2.0);
        const auto lo = std::lower_bound(series.timestamps.begin(), series.timestamps.end(), start);
        const auto hi = std::upper_bound(series.timestamps.begin(), series.timestamps.end(), start + 2.0);
        const int64_t count = hi - lo;
        if (count < 6) continue;
        const int64_t first = lo - series.timestamps.begin();

        CounterRng sub(cfg.base_seed, task_index, rng_stream::kSubsample);
        const int64_t max_n = std::min<int64_t>(cfg.n_points_high, count - cfg.n_points_low);
        const int64_t n = sub.uniform_int(cfg.n_points_low, max_n);
        const int64_t max_m = std::min<int64_t>(cfg.n_points_high, count - n);
        const int64_t m = sub.uniform_int(cfg.n_points_low, max_m);

        // partial Fisher-Yates for n + m distinct window indices
        std::vector<int64_t> idx(static_cast<size_t>(count));
        std::iota(idx.begin(), idx.end(), first);
        for (int64_t i = 0; i < n + m; ++i)
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(sub.uniform_int(i, count - 1))]);

        Task t;
        t.x_context = Tensor({n});
        t.y_context = Tensor({n});
        t.x_target = Tensor({m});
        t.y_target = Tensor({m});
        for (int64_t i = 0; i < n + m; ++i) {
            const auto j = static_cast<size_t>(idx[static_cast<size_t>(i)]);
            const double x = series.timestamps[j] - start;  // days from clip start, in [0, 2]
            const double y = series.readings[j];
            if (i < n) {
                t.x_context[i] = x;
                t.y_context[i] = y;
            } else {
                t.x_target[i - n] = x;
                t.y_target[i - n] = y;
            }
        }
        return t;
    }
    throw DegenerateInput("no clip window with at least 6 readings after 100 attempts");
}

// ---- out-of-domain transforms ----

// widened evaluation range; idempotent per domain
inline TaskConfig ood_x_config(TaskConfig cfg) {
    if (cfg.domain == TaskDomain::SmartMeter) {
        cfg.x_low = -1.0;
        cfg.x_high = 5.0;
    } else {
        cfg.x_low = -5.0;
        cfg.x_high = 5.0;
    }
    return cfg;
}

inline Task ood_y_scale(Task task, double factor) {
    if (!std::isfinite(factor) || factor == 0.0) throw ContractViolation("ood_y_scale: factor must be finite nonzero");
    for (auto& v : task.y_context.data) v *= factor;
    for (auto& v : task.y_target.data) v *= factor;
    return task;
}

// Context confined to a union of intervals; targets adjacent to the
// interval edges (within kAdjacentReach of an edge, outside the interval).
inline constexpr double kAdjacentReach = 0.25;

inline Task compacted_context_task(KernelSpec spec, const std::vector<std::pair<double, double>>& intervals,
                                   const TaskConfig& cfg, uint64_t task_index) {
    taskdetail::check_config(cfg);
    if (intervals.empty()) throw ContractViolation("compacted_context_task: no intervals");
    double total = 0.0;
    for (const auto& [lo, hi] : intervals) {
        if (!(lo < hi)) throw DegenerateInput("compacted_context_task: interval of non-positive width");
        total += hi - lo;
    }
    CounterRng counts(cfg.base_seed, task_index, rng_stream::kCounts);
    const int64_t n = counts.uniform_int(cfg.n_points_low, cfg.n_points_high);
    const int64_t m = counts.uniform_int(cfg.n_points_low, cfg.n_points_high);
    CounterRng pos(cfg.base_seed, task_index, rng_stream::kPositions);

    std::vector<double> xs;
    xs.reserve(static_cast<size_t>(n + m));
    for (int64_t i = 0; i < n; ++i) {
        double u = pos.uniform(0.0, total);
        for (const auto& [lo, hi] : intervals) {
            if (u <= hi - lo) {
                xs.push_back(lo + u);
                break;
            }
            u -= hi - lo;
        }
    }
    // adjacency zones flank every interval on both sides
    std::vector<std::pair<double, double>> zones;
    for (const auto& [lo, hi] : intervals) {
        zones.emplace_back(lo - kAdjacentReach, lo);
        zones.emplace_back(hi, hi + kAdjacentReach);
    }
    for (int64_t i = 0; i < m; ++i) {
        const auto& z = zones[static_cast<size_t>(pos.uniform_int(0, static_cast<int64_t>(zones.size()) - 1))];
        xs.push_back(pos.uniform(z.first, z.second));
    }
    const Tensor ys = gp_sample(spec, Tensor::from(xs), hash_mix(hash_mix(cfg.base_seed, task_index), rng_stream::kGpSample));
    return taskdetail::split_joint(xs, ys, n);
}

// Compacted-context clip: context confined to intervals on the clip axis,
// targets adjacent to the interval edges. Retries clips lacking candidates.
inline Task sample_smartmeter_compacted_task(const SmartMeterSeries& series,
                                             const std::vector<std::pair<double, double>>& intervals,
                                             const TaskConfig& cfg, uint64_t task_index) {
    taskdetail::check_config(cfg);
    if (series.timestamps.size() < 2 || series.timestamps.back() - series.timestamps.front() < 2.0)
        throw DegenerateInput("smart-meter series must span at least 2 days");
    for (const auto& [lo, hi] : intervals)
        if (!(lo < hi)) throw DegenerateInput("compacted smart-meter task: interval of non-positive width");
    const double t_first = series.timestamps.front();
    const double t_last = series.timestamps.back();
    CounterRng clip(cfg.base_seed, task_index, rng_stream::kClip);

    auto in_union = [&intervals](double x) {
        for (const auto& [lo, hi] : intervals)
            if (x >= lo && x <= hi) return true;
        return false;
    };
    auto adjacent = [&intervals, &in_union](double x) {
        if (in_union(x)) return false;
        for (const auto& [lo, hi] : intervals)
            if ((x >= lo - kAdjacentReach && x < lo) || (x > hi && x <= hi + kAdjacentReach)) return true;
        return false;
    };

    for (int attempt = 0; attempt < 100; ++attempt) {
        const double start = clip.uniform(t_first, t_last - 2.0);
        std::vector<size_t> ctx_cand, tgt_cand;
        for (size_t i = 0; i < series.timestamps.size(); ++i) {
            const double x = series.timestamps[i] - start;
            if (x < -kAdjacentReach || x > 2.0 + kAdjacentReach) continue;
            if (in_union(x)) ctx_cand.push_back(i);
            else if (adjacent(x)) tgt_cand.push_back(i);
        }
        if (static_cast<int>(ctx_cand.size()) < cfg.n_points_low || static_cast<int>(tgt_cand.size()) < cfg.n_points_low)
            continue;
        CounterRng sub(cfg.base_seed, task_index, rng_stream::kSubsample);
        const int64_t n = sub.uniform_int(cfg.n_points_low,
                                          std::min<int64_t>(cfg.n_points_high, static_cast<int64_t>(ctx_cand.size())));
        const int64_t m = sub.uniform_int(cfg.n_points_low,
                                          std::min<int64_t>(cfg.n_points_high, static_cast<int64_t>(tgt_cand.size())));
        auto take = [&sub](std::vector<size_t>& cand, int64_t count) {
            for (int64_t i = 0; i < count; ++i)
                std::swap(cand[static_cast<size_t>(i)],
                          cand[static_cast<size_t>(sub.uniform_int(i, static_cast<int64_t>(cand.size()) - 1))]);
        };
        take(ctx_cand, n);
        take(tgt_cand, m);
        Task t;
        t.x_context = Tensor({n});
        t.y_context = Tensor({n});
        t.x_target = Tensor({m});
        t.y_target = Tensor({m});
        for (int64_t i = 0; i < n; ++i) {
            t.x_context[i] = series.timestamps[ctx_cand[static_cast<size_t>(i)]] - start;
            t.y_context[i] = series.readings[ctx_cand[static_cast<size_t>(i)]];
        }
        for (int64_t i = 0; i < m; ++i) {
            t.x_target[i] = series.timestamps[tgt_cand[static_cast<size_t>(i)]] - start;
            t.y_target[i] = series.readings[tgt_cand[static_cast<size_t>(i)]];
        }
        return t;
    }
    throw DegenerateInput("no clip with enough compacted-context candidates after 100 attempts");
}

// ---- task archive (one JSON record per line) ----

inline std::string task_archive_to_string(const std::vector<Task>& tasks) {
    std::ostringstream os;
    for (const Task& t : tasks) {
        nlohmann::json rec;
        rec["x_context"] = t.x_context.data;
        rec["y_context"] = t.y_context.data;
        rec["x_target"] = t.x_target.data;
        rec["y_target"] = t.y_target.data;
        os << rec.dump() << '\n';
    }
    return os.str();
}

inline void write_task_archive(const std::string& path, const std::vector<Task>& tasks) {
    atomic_write(path, task_archive_to_string(tasks));
}

inline std::vector<Task> read_task_archive(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<Task> out;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw ParseError("line " + std::to_string(line_no) + ": bad task record");
        Task t;
        try {
            t.x_context = Tensor::from(rec.at("x_context").get<std::vector<double>>());
            t.y_context = Tensor::from(rec.at("y_context").get<std::vector<double>>());
            t.x_target = Tensor::from(rec.at("x_target").get<std::vector<double>>());
            t.y_target = Tensor::from(rec.at("y_target").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        out.push_back(std::move(t));
    }
    if (out.empty()) throw EmptyDataError("'" + path + "' holds no tasks");
    return out;
}

}  // namespace npprov

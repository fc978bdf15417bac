#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "npprov/checkpoint.hpp"
#include "npprov/gp.hpp"
#include "npprov/model_offgrid.hpp"
#include "npprov/model_ongrid.hpp"
#include "npprov/task.hpp"

namespace npprov {

struct TrainConfig {
    int epochs = 200;
    int tasks_per_epoch = 256;
    int batch_size = 16;
    double learning_rate = 5e-4;
    uint64_t seed = 0;
    std::string dataset = "eq";     // eq | matern | weakly-periodic | smartmeter | mnist
    std::string model = "np-prov";  // np-prov | convcnp

    void validate() const {
        if (epochs < 1 || tasks_per_epoch < 1 || batch_size < 1 || !(learning_rate > 0.0))
            throw ContractViolation("TrainConfig: all fields must be positive");
    }
};

inline constexpr double kGradClipNorm = 10.0;

// ---- Adam ----

struct AdamState {
    std::vector<Tensor> m, v;
};

inline void adam_init(AdamState& st, const ParamStore& params) {
    st.m.clear();
    st.v.clear();
    for (size_t i = 0; i < params.size(); ++i) {
        st.m.push_back(Tensor::zeros(params.tensor(i).shape));
        st.v.push_back(Tensor::zeros(params.tensor(i).shape));
    }
}

// bias-corrected update; t counts steps from 1
inline void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& st, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8, int64_t t = 1) {
    if (grads.size() != params.size() || st.m.size() != params.size())
        throw ContractViolation("adam_step: gradient/state count mismatch");
    if (t < 1) throw ContractViolation("adam_step: t must be >= 1");
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& w = params.tensor(i);
        const Tensor& g = grads[i];
        if (!g.same_shape(w))
            throw ContractViolation("adam_step: gradient shape mismatch for tensor '" + params.name(i) + "'");
        for (double gv : g.data)
            if (!std::isfinite(gv))
                throw NumericFault("adam_step: non-finite gradient for tensor '" + params.name(i) + "'");
        Tensor& m = st.m[i];
        Tensor& v = st.v[i];
        for (int64_t j = 0; j < w.numel(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// scales all gradients in place when the global norm exceeds max_norm
inline void clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor& g : grads)
        for (double v : g.data) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    for (Tensor& g : grads)
        for (double& v : g.data) v *= scale;
}

// ---- loss graph nodes ----

// per-point mean Gaussian log density of y under (mean, std)
inline Value gaussian_loglik_node(Graph& g, const Tensor& y, Value mean, Value std) {
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    Value diff = g.sub(g.constant(y), mean);
    Value z2 = g.div(g.mul(diff, diff), g.mul(g.constant(Tensor::scalar(2.0)), g.mul(std, std)));
    Value ll = g.sub(g.sub(g.neg(g.log(std)), z2), g.constant(Tensor::scalar(kHalfLog2Pi)));
    return g.mean_all(ll);
}

// negative target log-likelihood plus the reconstruction term
inline Value offgrid_loss_node(Graph& g, const OffGridOutputs& out, const Tensor& y_target) {
    return g.add(g.neg(gaussian_loglik_node(g, y_target, out.mean, out.std)), out.recon);
}

inline Value ongrid_loss_node(Graph& g, const OnGridOutputs& out, const Tensor& values) {
    return g.add(g.neg(gaussian_loglik_node(g, values, out.mean, out.std)), out.recon);
}

inline double loss(const Prediction& pred, const Task& task) {
    return -gaussian_loglik(task.y_target, {pred.mean, pred.std}) + pred.recon_loss;
}

// ---- task samplers ----

struct TaskSampler {
    std::string name;
    std::function<Task(uint64_t)> sample;
};

inline std::vector<std::pair<double, double>> compacted_intervals(TaskDomain domain) {
    if (domain == TaskDomain::SmartMeter) return {{0.2, 0.4}, {0.8, 1.1}};
    return {{-1.0, -0.5}, {1.2, 1.7}};
}

inline double ood_y_factor(TaskDomain domain) { return domain == TaskDomain::SmartMeter ? 1.5 : 10.0; }

// suite: in-range | ood-x | ood-y | compacted
inline TaskSampler make_suite_sampler(const std::string& dataset, const std::string& suite, TaskConfig cfg,
                                      std::shared_ptr<const SmartMeterSeries> series = nullptr) {
    const bool smart = dataset == "smartmeter";
    cfg.domain = smart ? TaskDomain::SmartMeter : TaskDomain::Synthetic;
    if (smart && !series) throw ContractViolation("smartmeter sampler needs a loaded series");
    if (smart) {
        cfg.x_low = 0.0;
        cfg.x_high = 2.0;
    }
    KernelSpec spec = smart ? KernelSpec{} : kernel_from_name(dataset);

    auto base = [spec, cfg, series, smart](uint64_t index) {
        return smart ? sample_smartmeter_task(*series, cfg, index) : sample_synthetic_task(spec, cfg, index);
    };

    TaskSampler s;
    s.name = dataset + "/" + suite;
    if (suite == "in-range") {
        s.sample = base;
    } else if (suite == "ood-x") {
        const TaskConfig wide = ood_x_config(cfg);
        if (smart) {
            // widened clip positions are not available from a fixed series;
            // the widened range re-seeds clip selection over the same data
            s.sample = [wide, series](uint64_t index) { return sample_smartmeter_task(*series, wide, index); };
        } else {
            s.sample = [spec, wide](uint64_t index) { return sample_synthetic_task(spec, wide, index); };
        }
    } else if (suite == "ood-y") {
        const double factor = ood_y_factor(cfg.domain);
        s.sample = [base, factor](uint64_t index) { return ood_y_scale(base(index), factor); };
    } else if (suite == "compacted") {
        if (smart) {
            auto intervals = compacted_intervals(TaskDomain::SmartMeter);
            s.sample = [series, cfg, intervals](uint64_t index) {
                return sample_smartmeter_compacted_task(*series, intervals, cfg, index);
            };
        } else {
            auto intervals = compacted_intervals(TaskDomain::Synthetic);
            s.sample = [spec, cfg, intervals](uint64_t index) {
                return compacted_context_task(spec, intervals, cfg, index);
            };
        }
    } else {
        throw ContractViolation("unknown suite '" + suite + "'");
    }
    return s;
}

// ---- training ----

struct TrainResult {
    std::vector<double> epoch_loss;
    bool aborted = false;
    std::string abort_reason;
};

inline TrainResult train_offgrid(OffGridModel& model, const TrainConfig& cfg, const TaskSampler& sampler) {
    cfg.validate();
    TrainResult result;
    AdamState adam;
    adam_init(adam, model.params);
    int64_t step = 0;
    const int batches = (cfg.tasks_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // last-good snapshot so a numeric fault aborts without losing the run
        const ParamStore last_good = model.params;
        double epoch_loss = 0.0;
        int64_t epoch_tasks = 0;
        try {
            for (int b = 0; b < batches; ++b) {
                std::vector<Tensor> grad_sum;
                double batch_loss = 0.0;
                int in_batch = 0;
                for (int i = 0; i < cfg.batch_size; ++i) {
                    const int64_t ordinal = static_cast<int64_t>(b) * cfg.batch_size + i;
                    if (ordinal >= cfg.tasks_per_epoch) break;
                    const uint64_t index =
                        static_cast<uint64_t>(epoch) * static_cast<uint64_t>(cfg.tasks_per_epoch) +
                        static_cast<uint64_t>(ordinal);
                    const Task task = sampler.sample(index);
                    Graph g;
                    BoundParams p = bind_params(g, model.params);
                    OffGridOutputs out = offgrid_forward(g, model, p, task);
                    Value l = offgrid_loss_node(g, out, task.y_target);
                    const double lv = g.value(l)[0];
                    if (!std::isfinite(lv)) throw NumericFault("train: non-finite loss");
                    g.backward(l);
                    std::vector<Tensor> grads = collect_grads(g, p);
                    if (grad_sum.empty()) {
                        grad_sum = std::move(grads);
                    } else {
                        for (size_t k = 0; k < grads.size(); ++k)
                            for (int64_t j = 0; j < grads[k].numel(); ++j) grad_sum[k][j] += grads[k][j];
                    }
                    batch_loss += lv;
                    ++in_batch;
                }
                if (in_batch == 0) continue;
                for (Tensor& t : grad_sum)
                    for (double& v : t.data) v /= in_batch;
                clip_global_norm(grad_sum, kGradClipNorm);
                adam_step(model.params, grad_sum, adam, cfg.learning_rate, 0.9, 0.999, 1e-8, ++step);
                epoch_loss += batch_loss;
                epoch_tasks += in_batch;
            }
        } catch (const NumericFault& e) {
            model.params = last_good;
            result.aborted = true;
            result.abort_reason = e.what();
            return result;
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_tasks));
    }
    return result;
}

// image curriculum: image index and mask are pure functions of the task index
inline TrainResult train_ongrid(OnGridModel& model, const TrainConfig& cfg, const std::vector<Tensor>& images) {
    cfg.validate();
    if (images.empty()) throw EmptyDataError("train_ongrid: no images");
    const int64_t h = images[0].shape[1], w = images[0].shape[2];
    TrainResult result;
    AdamState adam;
    adam_init(adam, model.params);
    int64_t step = 0;
    const int batches = (cfg.tasks_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const ParamStore last_good = model.params;
        double epoch_loss = 0.0;
        int64_t epoch_tasks = 0;
        try {
            for (int b = 0; b < batches; ++b) {
                std::vector<Tensor> grad_sum;
                double batch_loss = 0.0;
                int in_batch = 0;
                for (int i = 0; i < cfg.batch_size; ++i) {
                    const int64_t ordinal = static_cast<int64_t>(b) * cfg.batch_size + i;
                    if (ordinal >= cfg.tasks_per_epoch) break;
                    const uint64_t index =
                        static_cast<uint64_t>(epoch) * static_cast<uint64_t>(cfg.tasks_per_epoch) +
                        static_cast<uint64_t>(ordinal);
                    CounterRng pick(cfg.seed, index, rng_stream::kCounts);
                    MaskedImage img;
                    img.values = images[static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(images.size()) - 1))];
                    img.mask = sample_mask(h, w, cfg.seed, index);
                    Graph g;
                    BoundParams p = bind_params(g, model.params);
                    OnGridOutputs out = ongrid_forward(g, model, p, img);
                    Value l = ongrid_loss_node(g, out, img.values);
                    const double lv = g.value(l)[0];
                    if (!std::isfinite(lv)) throw NumericFault("train: non-finite loss");
                    g.backward(l);
                    std::vector<Tensor> grads = collect_grads(g, p);
                    if (grad_sum.empty()) {
                        grad_sum = std::move(grads);
                    } else {
                        for (size_t k = 0; k < grads.size(); ++k)
                            for (int64_t j = 0; j < grads[k].numel(); ++j) grad_sum[k][j] += grads[k][j];
                    }
                    batch_loss += lv;
                    ++in_batch;
                }
                if (in_batch == 0) continue;
                for (Tensor& t : grad_sum)
                    for (double& v : t.data) v /= in_batch;
                clip_global_norm(grad_sum, kGradClipNorm);
                adam_step(model.params, grad_sum, adam, cfg.learning_rate, 0.9, 0.999, 1e-8, ++step);
                epoch_loss += batch_loss;
                epoch_tasks += in_batch;
            }
        } catch (const NumericFault& e) {
            model.params = last_good;
            result.aborted = true;
            result.abort_reason = e.what();
            return result;
        }
        result.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_tasks));
    }
    return result;
}

// ---- evaluation ----

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual Prediction predict_task(const Task&) const = 0;
    virtual std::string name() const = 0;
};

class OffGridPredictor : public Predictor {
public:
    explicit OffGridPredictor(const OffGridModel& model) : model_(&model) {}
    Prediction predict_task(const Task& task) const override { return predict(*model_, task); }
    std::string name() const override { return offgrid_kind_name(model_->kind); }

private:
    const OffGridModel* model_;
};

// exact posterior under the generating kernel; the reference every neural
// model is compared against
class GpOraclePredictor : public Predictor {
public:
    explicit GpOraclePredictor(KernelSpec spec) : spec_(spec) {}
    Prediction predict_task(const Task& task) const override {
        GaussianPrediction p = gp_posterior(spec_, task.x_context, task.y_context, task.x_target);
        return {p.mean, p.std, 0.0};
    }
    std::string name() const override { return std::string("gp-oracle-") + kernel_name(spec_); }

private:
    KernelSpec spec_;
};

struct EvalReport {
    std::string suite;
    double mean_ll = 0.0;
    double std_ll = 0.0;
    int n_tasks = 0;
    int repeats = 0;
    double mean_ctx_std = 0.0;
    double recon_loss = 0.0;
    double max_std_diff_under_y_scale = 0.0;
};

// One prediction serves targets and context positions: the augmented target
// vector is [targets, contexts], evaluated in a single forward pass.
inline EvalReport evaluate(const Predictor& model, const TaskSampler& sampler, const std::string& suite, int n_tasks,
                           int repeats, double y_probe_factor = 10.0) {
    if (n_tasks < 1 || repeats < 1) throw ContractViolation("evaluate: n_tasks and repeats must be positive");
    EvalReport rep;
    rep.suite = suite;
    rep.n_tasks = n_tasks;
    rep.repeats = repeats;
    std::vector<double> repeat_means;
    double ctx_std_acc = 0.0, recon_acc = 0.0, max_diff = 0.0;
    for (int r = 0; r < repeats; ++r) {
        double ll_acc = 0.0;
        for (int i = 0; i < n_tasks; ++i) {
            const uint64_t index = static_cast<uint64_t>(r) * static_cast<uint64_t>(n_tasks) + static_cast<uint64_t>(i);
            Task task = sampler.sample(index);
            const int64_t m = task.x_target.numel(), n = task.x_context.numel();
            Task aug = task;
            aug.x_target = Tensor({m + n});
            aug.y_target = Tensor({m + n});
            for (int64_t j = 0; j < m; ++j) {
                aug.x_target[j] = task.x_target[j];
                aug.y_target[j] = task.y_target[j];
            }
            for (int64_t j = 0; j < n; ++j) {
                aug.x_target[m + j] = task.x_context[j];
                aug.y_target[m + j] = task.y_context[j];
            }
            const Prediction pred = model.predict_task(aug);
            GaussianPrediction head{Tensor({m}), Tensor({m})};
            for (int64_t j = 0; j < m; ++j) {
                head.mean[j] = pred.mean[j];
                head.std[j] = pred.std[j];
            }
            ll_acc += gaussian_loglik(task.y_target, head);
            double cs = 0.0;
            for (int64_t j = 0; j < n; ++j) cs += pred.std[m + j];
            ctx_std_acc += cs / static_cast<double>(n);
            recon_acc += pred.recon_loss;
            const Prediction scaled = model.predict_task(ood_y_scale(aug, y_probe_factor));
            for (int64_t j = 0; j < m + n; ++j)
                max_diff = std::max(max_diff, std::abs(scaled.std[j] - pred.std[j]));
        }
        repeat_means.push_back(ll_acc / n_tasks);
    }
    double mean = 0.0;
    for (double v : repeat_means) mean += v;
    mean /= repeats;
    double var = 0.0;
    for (double v : repeat_means) var += (v - mean) * (v - mean);
    rep.mean_ll = mean;
    rep.std_ll = repeats > 1 ? std::sqrt(var / (repeats - 1)) : 0.0;
    rep.mean_ctx_std = ctx_std_acc / (static_cast<double>(n_tasks) * repeats);
    rep.recon_loss = recon_acc / (static_cast<double>(n_tasks) * repeats);
    rep.max_std_diff_under_y_scale = max_diff;
    return rep;
}

// ---- out-of-domain variance audit ----

struct VarianceAuditRow {
    uint64_t task_index = 0;
    double max_std_diff = 0.0;
    double mean_ctx_std = 0.0;
};

struct VarianceAudit {
    std::string model_name;
    int n_tasks = 0;
    double y_factor = 10.0;
    double max_std_diff = 0.0;   // max over tasks
    double mean_ctx_std = 0.0;   // mean over tasks
    std::vector<VarianceAuditRow> rows;
};

// std before/after scaling every y by y_factor, plus std at context points
inline VarianceAudit ood_variance_audit(const Predictor& model, const TaskSampler& sampler, int n_tasks,
                                        double y_factor = 10.0) {
    if (n_tasks < 1) throw ContractViolation("ood_variance_audit: n_tasks must be positive");
    VarianceAudit audit;
    audit.model_name = model.name();
    audit.n_tasks = n_tasks;
    audit.y_factor = y_factor;
    for (int i = 0; i < n_tasks; ++i) {
        const Task task = sampler.sample(static_cast<uint64_t>(i));
        const Prediction before = model.predict_task(task);
        const Prediction after = model.predict_task(ood_y_scale(task, y_factor));
        VarianceAuditRow row;
        row.task_index = static_cast<uint64_t>(i);
        for (int64_t j = 0; j < before.std.numel(); ++j)
            row.max_std_diff = std::max(row.max_std_diff, std::abs(after.std[j] - before.std[j]));
        Task at_ctx = task;
        at_ctx.x_target = task.x_context;
        at_ctx.y_target = task.y_context;
        const Prediction ctx = model.predict_task(at_ctx);
        double cs = 0.0;
        for (int64_t j = 0; j < ctx.std.numel(); ++j) cs += ctx.std[j];
        row.mean_ctx_std = cs / static_cast<double>(ctx.std.numel());
        audit.max_std_diff = std::max(audit.max_std_diff, row.max_std_diff);
        audit.mean_ctx_std += row.mean_ctx_std;
        audit.rows.push_back(row);
    }
    audit.mean_ctx_std /= n_tasks;
    return audit;
}

// ---- report serialization (one JSON record per line) ----

inline std::string eval_reports_to_string(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    for (const EvalReport& r : reports) {
        nlohmann::json rec;
        rec["suite"] = r.suite;
        rec["mean_ll"] = r.mean_ll;
        rec["std_ll"] = r.std_ll;
        rec["n_tasks"] = r.n_tasks;
        rec["repeats"] = r.repeats;
        rec["mean_ctx_std"] = r.mean_ctx_std;
        rec["recon_loss"] = r.recon_loss;
        rec["max_std_diff_under_y_scale"] = r.max_std_diff_under_y_scale;
        os << rec.dump() << '\n';
    }
    return os.str();
}

inline void write_eval_reports(const std::string& path, const std::vector<EvalReport>& reports) {
    atomic_write(path, eval_reports_to_string(reports));
}

inline std::vector<EvalReport> read_eval_reports(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::vector<EvalReport> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw ParseError("bad eval-report record");
        EvalReport r;
        r.suite = rec.at("suite").get<std::string>();
        r.mean_ll = rec.at("mean_ll").get<double>();
        r.std_ll = rec.at("std_ll").get<double>();
        r.n_tasks = rec.at("n_tasks").get<int>();
        r.repeats = rec.at("repeats").get<int>();
        r.mean_ctx_std = rec.at("mean_ctx_std").get<double>();
        r.recon_loss = rec.at("recon_loss").get<double>();
        r.max_std_diff_under_y_scale = rec.at("max_std_diff_under_y_scale").get<double>();
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string variance_audit_to_string(const VarianceAudit& a) {
    std::ostringstream os;
    for (const VarianceAuditRow& row : a.rows) {
        nlohmann::json rec;
        rec["task_index"] = row.task_index;
        rec["max_std_diff"] = row.max_std_diff;
        rec["mean_ctx_std"] = row.mean_ctx_std;
        os << rec.dump() << '\n';
    }
    nlohmann::json summary;
    summary["model"] = a.model_name;
    summary["n_tasks"] = a.n_tasks;
    summary["y_factor"] = a.y_factor;
    summary["max_std_diff"] = a.max_std_diff;
    summary["mean_ctx_std"] = a.mean_ctx_std;
    os << summary.dump() << '\n';
    return os.str();
}

inline void write_variance_audit(const std::string& path, const VarianceAudit& a) {
    atomic_write(path, variance_audit_to_string(a));
}

inline VarianceAudit read_variance_audit(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    VarianceAudit a;
    std::string line, last;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded()) throw ParseError("bad audit record");
        if (rec.contains("model")) {
            a.model_name = rec.at("model").get<std::string>();
            a.n_tasks = rec.at("n_tasks").get<int>();
            a.y_factor = rec.at("y_factor").get<double>();
            a.max_std_diff = rec.at("max_std_diff").get<double>();
            a.mean_ctx_std = rec.at("mean_ctx_std").get<double>();
        } else {
            VarianceAuditRow row;
            row.task_index = rec.at("task_index").get<uint64_t>();
            row.max_std_diff = rec.at("max_std_diff").get<double>();
            row.mean_ctx_std = rec.at("mean_ctx_std").get<double>();
            a.rows.push_back(row);
        }
    }
    return a;
}

// ---- checkpoint config round trip ----

inline std::map<std::string, std::string> to_config_map(const TrainConfig& cfg, const GridSpec& grid) {
    std::map<std::string, std::string> m;
    m["model"] = cfg.model;
    m["dataset"] = cfg.dataset;
    m["epochs"] = std::to_string(cfg.epochs);
    m["tasks_per_epoch"] = std::to_string(cfg.tasks_per_epoch);
    m["batch_size"] = std::to_string(cfg.batch_size);
    std::ostringstream lr;
    lr.precision(17);
    lr << cfg.learning_rate;
    m["learning_rate"] = lr.str();
    m["seed"] = std::to_string(cfg.seed);
    m["points_per_unit"] = std::to_string(grid.points_per_unit);
    std::ostringstream mg;
    mg.precision(17);
    mg << grid.margin;
    m["margin"] = mg.str();
    return m;
}

inline void from_config_map(const std::map<std::string, std::string>& m, TrainConfig& cfg, GridSpec& grid) {
    auto get = [&m](const char* key) -> const std::string& {
        auto it = m.find(key);
        if (it == m.end()) throw BadVersionError(std::string("checkpoint config missing key '") + key + "'");
        return it->second;
    };
    cfg.model = get("model");
    cfg.dataset = get("dataset");
    cfg.epochs = std::stoi(get("epochs"));
    cfg.tasks_per_epoch = std::stoi(get("tasks_per_epoch"));
    cfg.batch_size = std::stoi(get("batch_size"));
    cfg.learning_rate = std::stod(get("learning_rate"));
    cfg.seed = std::stoull(get("seed"));
    grid.points_per_unit = std::stoi(get("points_per_unit"));
    grid.margin = std::stod(get("margin"));
}

}  // namespace npprov

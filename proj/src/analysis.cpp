#include "recengine/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "recengine/feedback.hpp"
#include "recengine/linalg.hpp"
#include "recengine/rng.hpp"
#include "recengine/stats.hpp"

namespace rec {

namespace {

const std::string kMethodNames[] = {"raw", "ols", "doubly_robust"};
const std::string kOutcomeNames[] = {"journal_updates",    "peer_first_visits",
                                     "peer_repeat_visits", "peer_interactions",
                                     "peer_initiations",   "self_site_interactions"};

double clip01(double p) { return std::min(0.99, std::max(0.01, p)); }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---- CSV helpers ---------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (quoted) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": unterminated quote");
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

bool is_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

double parse_number(const std::string& s, std::size_t line_no, const std::string& column) {
    if (is_missing(s)) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": missing value in column '" +
                                 column + "'");
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || !std::isfinite(v)) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": invalid number '" + s +
                                 "' in column '" + column + "'");
    }
    return v;
}

// ---- estimator cores over row subsets ------------------------------------

double raw_point(const OutcomePanel& panel, const std::vector<std::size_t>& idx) {
    double sum1 = 0, sum0 = 0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i : idx) {
        if (panel.treated[i]) {
            sum1 += panel.outcome[i];
            ++n1;
        } else {
            sum0 += panel.outcome[i];
            ++n0;
        }
    }
    return sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
}

double ols_point(const OutcomePanel& panel, const std::vector<std::size_t>& idx, bool strict) {
    const std::size_t p = panel.p();
    const std::size_t cols = 2 + p;
    std::vector<double> design(idx.size() * cols);
    std::vector<double> y(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t i = idx[r];
        double* row = design.data() + r * cols;
        row[0] = 1.0;
        row[1] = static_cast<double>(panel.treated[i]);
        const double* a = panel.row(i);
        for (std::size_t j = 0; j < p; ++j) row[2 + j] = a[j];
        y[r] = panel.outcome[i];
    }
    std::vector<std::string> names;
    names.reserve(cols);
    names.emplace_back("intercept");
    names.emplace_back("treated");
    for (const auto& c : panel.covariate_names) names.push_back(c);
    const auto fit = least_squares(design, idx.size(), cols, y, !strict, &names);
    return fit.coef[1];
}

// Logistic propensity + per-arm outcome regressions on [1, A].
double dr_point(const OutcomePanel& panel, const std::vector<std::size_t>& idx, bool strict) {
    const std::size_t p = panel.p();
    const std::size_t n = idx.size();

    std::vector<double> covs(n * p);
    std::vector<int> t(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double* a = panel.row(idx[r]);
        std::copy(a, a + p, covs.begin() + static_cast<std::ptrdiff_t>(r * p));
        t[r] = panel.treated[idx[r]];
    }
    const auto prop = logistic_irls(covs, n, p, t, 100, strict);

    const std::size_t cols = 1 + p;
    auto arm_fit = [&](int arm) {
        std::vector<double> design;
        std::vector<double> y;
        for (std::size_t r = 0; r < n; ++r) {
            if (t[r] != arm) continue;
            design.push_back(1.0);
            const double* a = panel.row(idx[r]);
            design.insert(design.end(), a, a + p);
            y.push_back(panel.outcome[idx[r]]);
        }
        std::vector<std::string> names;
        names.emplace_back("intercept");
        for (const auto& c : panel.covariate_names) names.push_back(c);
        return least_squares(design, y.size(), cols, y, !strict, &names);
    };
    const auto m1 = arm_fit(1);
    const auto m0 = arm_fit(0);

    auto predict = [&](const LeastSquaresResult& fit, std::size_t r) {
        double v = fit.coef[0];
        const double* a = panel.row(idx[r]);
        for (std::size_t j = 0; j < p; ++j) v += fit.coef[1 + j] * a[j];
        return v;
    };

    double term1 = 0, term0 = 0;
    for (std::size_t r = 0; r < n; ++r) {
        double eta = prop.coef[0];
        const double* a = panel.row(idx[r]);
        for (std::size_t j = 0; j < p; ++j) eta += prop.coef[1 + j] * a[j];
        const double e = clip01(sigmoid(eta));
        const double y = panel.outcome[idx[r]];
        const double mu1 = predict(m1, r);
        const double mu0 = predict(m0, r);
        if (t[r]) {
            term1 += (y - mu1) / e + mu1;
            term0 += mu0;
        } else {
            term1 += mu1;
            term0 += (y - mu0) / (1.0 - e) + mu0;
        }
    }
    return (term1 - term0) / static_cast<double>(n);
}

template <typename PointFn>
EffectEstimate bootstrap_effect(const OutcomePanel& panel, EffectMethod method,
                                std::uint64_t seed, int n_bootstrap, PointFn&& point_fn) {
    if (n_bootstrap < 1) throw std::invalid_argument("bootstrap needs at least one iteration");
    std::vector<std::size_t> treated_idx, control_idx, full;
    for (std::size_t i = 0; i < panel.n(); ++i) {
        (panel.treated[i] ? treated_idx : control_idx).push_back(i);
        full.push_back(i);
    }
    if (treated_idx.empty() || control_idx.empty()) {
        throw std::invalid_argument("panel needs both treated and control units");
    }

    EffectEstimate est;
    est.method = method;
    est.seed = seed;
    est.n_bootstrap = n_bootstrap;
    est.n_treated = treated_idx.size();
    est.n_control = control_idx.size();
    est.point = point_fn(full, true);

    std::vector<double> boots;
    boots.reserve(static_cast<std::size_t>(n_bootstrap));
    std::vector<std::size_t> resample;
    resample.reserve(panel.n());
    for (int iter = 0; iter < n_bootstrap; ++iter) {
        Rng rng(seed, "bootstrap", static_cast<std::uint64_t>(iter));
        resample.clear();
        for (std::size_t d = 0; d < treated_idx.size(); ++d) {
            resample.push_back(treated_idx[rng.next_below(treated_idx.size())]);
        }
        for (std::size_t d = 0; d < control_idx.size(); ++d) {
            resample.push_back(control_idx[rng.next_below(control_idx.size())]);
        }
        boots.push_back(point_fn(resample, false));
    }
    est.ci_low = stats::quantile(boots, 0.025);
    est.ci_high = stats::quantile(std::move(boots), 0.975);
    return est;
}

} // namespace

const std::string& effect_method_name(EffectMethod m) {
    return kMethodNames[static_cast<int>(m)];
}

std::optional<EffectMethod> effect_method_from_name(const std::string& name) {
    for (int i = 0; i < 3; ++i) {
        if (kMethodNames[i] == name) return static_cast<EffectMethod>(i);
    }
    return std::nullopt;
}

const std::string& outcome_kind_name(OutcomeKind k) {
    return kOutcomeNames[static_cast<int>(k)];
}

std::optional<OutcomeKind> outcome_kind_from_name(const std::string& name) {
    for (int i = 0; i < kOutcomeKindCount; ++i) {
        if (kOutcomeNames[i] == name) return static_cast<OutcomeKind>(i);
    }
    return std::nullopt;
}

OutcomePanel read_panel_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error(path + ": cannot open for reading");

    OutcomePanel panel;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            // Optional window metadata: "# pre_weeks=5 post_weeks=13".
            std::istringstream meta(line.substr(1));
            std::string tok;
            while (meta >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq);
                const std::string val = tok.substr(eq + 1);
                try {
                    if (key == "pre_weeks") panel.pre_weeks = std::stoi(val);
                    if (key == "post_weeks") panel.post_weeks = std::stoi(val);
                } catch (const std::exception&) {
                    throw std::runtime_error("line " + std::to_string(line_no) +
                                             ": invalid window metadata '" + tok + "'");
                }
            }
            continue;
        }
        auto fields = split_csv_line(line, line_no);
        if (!have_header) {
            if (fields.size() < 3 || fields.front() != "unit" || fields[1] != "treated" ||
                fields.back() != "outcome") {
                throw std::runtime_error(
                    "line " + std::to_string(line_no) +
                    ": header must be unit,treated,<covariates...>,outcome");
            }
            panel.covariate_names.assign(fields.begin() + 2, fields.end() - 1);
            have_header = true;
            continue;
        }
        if (fields.size() != panel.p() + 3) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(panel.p() + 3) + " fields, got " +
                                     std::to_string(fields.size()));
        }
        if (is_missing(fields[0])) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": missing value in column 'unit'");
        }
        const double t = parse_number(fields[1], line_no, "treated");
        if (t != 0.0 && t != 1.0) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": treated must be 0 or 1, got '" + fields[1] + "'");
        }
        panel.unit_ids.push_back(fields[0]);
        panel.treated.push_back(static_cast<int>(t));
        for (std::size_t j = 0; j < panel.p(); ++j) {
            panel.covariates.push_back(
                parse_number(fields[2 + j], line_no, panel.covariate_names[j]));
        }
        panel.outcome.push_back(parse_number(fields.back(), line_no, "outcome"));
    }
    if (!have_header) throw std::runtime_error(path + ": empty panel file");
    return panel;
}

void write_panel_csv(const OutcomePanel& panel, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error(path + ": cannot open for writing");
    os << "# pre_weeks=" << panel.pre_weeks << " post_weeks=" << panel.post_weeks << "\n";
    os << "unit,treated";
    for (const auto& c : panel.covariate_names) os << ',' << csv_field(c);
    os << ",outcome\n";
    for (std::size_t i = 0; i < panel.n(); ++i) {
        os << csv_field(panel.unit_ids[i]) << ',' << panel.treated[i];
        const double* a = panel.row(i);
        for (std::size_t j = 0; j < panel.p(); ++j) os << ',' << format_number(a[j]);
        os << ',' << format_number(panel.outcome[i]) << '\n';
    }
}

EffectEstimate raw_effect(const OutcomePanel& panel, std::uint64_t seed, int n_bootstrap) {
    return bootstrap_effect(panel, EffectMethod::raw, seed, n_bootstrap,
                            [&](const std::vector<std::size_t>& idx, bool) {
                                return raw_point(panel, idx);
                            });
}

EffectEstimate ols_effect(const OutcomePanel& panel, std::uint64_t seed, int n_bootstrap) {
    return bootstrap_effect(panel, EffectMethod::ols, seed, n_bootstrap,
                            [&](const std::vector<std::size_t>& idx, bool strict) {
                                return ols_point(panel, idx, strict);
                            });
}

EffectEstimate doubly_robust_effect(const OutcomePanel& panel, std::uint64_t seed,
                                    int n_bootstrap) {
    return bootstrap_effect(panel, EffectMethod::doubly_robust, seed, n_bootstrap,
                            [&](const std::vector<std::size_t>& idx, bool strict) {
                                return dr_point(panel, idx, strict);
                            });
}

LogisticFit logistic_irls(const std::vector<double>& x, std::size_t n, std::size_t p,
                          const std::vector<int>& y, int max_iter, bool error_on_failure) {
    if (n == 0) throw std::invalid_argument("logistic regression needs rows");
    if (x.size() != n * p || y.size() != n) {
        throw std::invalid_argument("logistic regression shape mismatch");
    }

    const std::size_t cols = 1 + p;
    std::vector<double> design(n * cols);
    for (std::size_t i = 0; i < n; ++i) {
        design[i * cols] = 1.0;
        for (std::size_t j = 0; j < p; ++j) design[i * cols + 1 + j] = x[i * p + j];
    }

    LogisticFit fit;
    fit.coef.assign(cols, 0.0);
    std::vector<double> eta(n), prob(n), w(n), z(n);

    auto refresh = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            double v = 0.0;
            const double* row = design.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) v += row[j] * fit.coef[j];
            eta[i] = v;
            prob[i] = clip01(sigmoid(v));
        }
    };
    auto gradient_norm = [&]() {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double g = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                g += design[i * cols + j] * (static_cast<double>(y[i]) - prob[i]);
            }
            norm2 += g * g;
        }
        return std::sqrt(norm2);
    };
    auto deviance = [&]() {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d -= 2.0 * (y[i] ? std::log(prob[i]) : std::log(1.0 - prob[i]));
        }
        return d;
    };

    refresh();
    double prev_dev = deviance();
    for (int iter = 1; iter <= max_iter; ++iter) {
        fit.iterations = iter;
        if (gradient_norm() < 1e-8) {
            fit.converged = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = prob[i] * (1.0 - prob[i]);
            z[i] = eta[i] + (static_cast<double>(y[i]) - prob[i]) / w[i];
        }
        const auto step = weighted_least_squares(design, n, cols, z, w, !error_on_failure);
        // Line search along the update direction. Halving guards against
        // overshoot; doubling while the deviance keeps dropping matters on
        // separable data, where the unscaled update only inches toward the
        // clip bounds and a fixed iteration cap would cut the march short.
        const std::vector<double> base = fit.coef;
        auto eval = [&](double scale) {
            for (std::size_t j = 0; j < cols; ++j) {
                fit.coef[j] = base[j] + scale * (step.coef[j] - base[j]);
            }
            refresh();
            return deviance();
        };
        double scale = 1.0;
        double dev = eval(scale);
        if (dev > prev_dev) {
            for (int half = 0; half < 30 && dev > prev_dev; ++half) {
                scale *= 0.5;
                dev = eval(scale);
            }
        } else {
            for (int dbl = 0; dbl < 30; ++dbl) {
                const double wider = eval(2.0 * scale);
                if (wider >= dev) break;
                scale *= 2.0;
                dev = wider;
            }
            dev = eval(scale); // leave state at the accepted scale
        }
        double max_delta = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            max_delta = std::max(max_delta, std::abs(fit.coef[j] - base[j]));
        }
        // Clipping plateaus the deviance on separable data, which counts as
        // convergence: the fit cannot improve further inside the clip range.
        if (max_delta < 1e-10 || std::abs(dev - prev_dev) < 1e-10 * (1.0 + std::abs(dev))) {
            fit.converged = true;
            fit.gradient_norm = gradient_norm();
            return fit;
        }
        prev_dev = dev;
    }
    fit.gradient_norm = gradient_norm();
    if (fit.converged) return fit;
    if (error_on_failure) {
        throw std::runtime_error("propensity model failed to converge after " +
                                 std::to_string(max_iter) + " iterations (final gradient norm " +
                                 format_number(fit.gradient_norm) + ")");
    }
    return fit;
}

std::vector<double> propensity_scores(const OutcomePanel& panel) {
    const auto fit = logistic_irls(panel.covariates, panel.n(), panel.p(), panel.treated);
    std::vector<double> e(panel.n());
    for (std::size_t i = 0; i < panel.n(); ++i) {
        double eta = fit.coef[0];
        const double* a = panel.row(i);
        for (std::size_t j = 0; j < panel.p(); ++j) eta += fit.coef[1 + j] * a[j];
        e[i] = clip01(sigmoid(eta));
    }
    return e;
}

PanelBuildResult build_outcome_panel(const EventLog& log, const std::vector<UnitSpec>& units,
                                     OutcomeKind outcome, int pre_weeks, int post_weeks,
                                     std::uint64_t seed) {
    if (pre_weeks < 1 || post_weeks < 1) {
        throw std::invalid_argument("panel windows must be at least one week");
    }

    PanelBuildResult out;
    auto& panel = out.panel;
    panel.pre_weeks = pre_weeks;
    panel.post_weeks = post_weeks;
    for (int k = 0; k < kOutcomeKindCount; ++k) {
        panel.covariate_names.push_back("pre_" + kOutcomeNames[k]);
    }
    panel.covariate_names.emplace_back("tenure_weeks");

    // Resolve anchors. Units without an event time draw one from those of
    // the same batch (falling back to every known time), keyed by unit name.
    std::unordered_map<std::string, std::vector<std::int64_t>> batch_times;
    std::vector<std::int64_t> all_times;
    for (const auto& u : units) {
        if (!u.event_time) continue;
        all_times.push_back(*u.event_time);
        if (u.batch) batch_times[*u.batch].push_back(*u.event_time);
    }

    struct Row {
        const UnitSpec* spec;
        int user;
        std::int64_t t;
    };
    std::vector<Row> rows;
    for (const auto& u : units) {
        const int user = log.user_index(u.unit);
        if (user < 0) {
            ++out.n_excluded;
            out.excluded_units.push_back(u.unit);
            continue;
        }
        std::int64_t t;
        if (u.event_time) {
            t = *u.event_time;
        } else {
            const std::vector<std::int64_t>* pool = nullptr;
            if (u.batch) {
                auto it = batch_times.find(*u.batch);
                if (it != batch_times.end() && !it->second.empty()) pool = &it->second;
            }
            if (!pool && !all_times.empty()) pool = &all_times;
            if (!pool) {
                ++out.n_excluded;
                out.excluded_units.push_back(u.unit);
                continue;
            }
            Rng rng(seed, "visit-time", u.unit);
            t = (*pool)[rng.next_below(pool->size())];
        }
        rows.push_back(Row{&u, user, t});
    }

    // One row per unit even if the same user appears twice.
    std::unordered_map<int, std::vector<std::size_t>> rows_of_user;
    for (std::size_t r = 0; r < rows.size(); ++r) rows_of_user[rows[r].user].push_back(r);

    const auto n_rows = rows.size();
    std::vector<std::array<double, kOutcomeKindCount>> pre(n_rows), post(n_rows);
    for (auto& a : pre) a.fill(0.0);
    for (auto& a : post) a.fill(0.0);

    const std::int64_t pre_len = static_cast<std::int64_t>(pre_weeks) * kMsPerWeek;
    const std::int64_t post_len = static_cast<std::int64_t>(post_weeks) * kMsPerWeek;
    auto bump = [&](int user, std::int64_t ts, OutcomeKind kind) {
        auto it = rows_of_user.find(user);
        if (it == rows_of_user.end()) return;
        for (std::size_t r : it->second) {
            const std::int64_t t = rows[r].t;
            if (ts >= t - pre_len && ts < t) pre[r][static_cast<int>(kind)] += 1.0;
            else if (ts >= t && ts < t + post_len) post[r][static_cast<int>(kind)] += 1.0;
        }
    };

    // Chronological scan; "first visit" state is global, not window-local.
    std::unordered_set<std::uint64_t> visited;
    const auto pair_key = [](int u, int s) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
               static_cast<std::uint32_t>(s);
    };
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& rec = log.records()[i];
        const int u = log.actor_of(i);
        const int s = log.site_of(i);
        switch (rec.kind) {
            case EventKind::journal_update:
                bump(u, rec.ts, OutcomeKind::journal_updates);
                break;
            case EventKind::visit: {
                const bool first = visited.insert(pair_key(u, s)).second;
                if (!log.is_author(u, s, rec.ts)) {
                    bump(u, rec.ts,
                         first ? OutcomeKind::peer_first_visits : OutcomeKind::peer_repeat_visits);
                }
                break;
            }
            case EventKind::reaction:
            case EventKind::comment:
            case EventKind::guestbook:
                bump(u, rec.ts,
                     log.is_author(u, s, rec.ts) ? OutcomeKind::self_site_interactions
                                                 : OutcomeKind::peer_interactions);
                break;
            case EventKind::follow:
                break;
        }
    }
    for (const auto& init : extract_initiations(log)) {
        bump(init.source, init.ts, OutcomeKind::peer_initiations);
    }

    for (std::size_t r = 0; r < n_rows; ++r) {
        panel.unit_ids.push_back(rows[r].spec->unit);
        panel.treated.push_back(rows[r].spec->treated);
        for (int k = 0; k < kOutcomeKindCount; ++k) panel.covariates.push_back(pre[r][k]);
        const std::int64_t first = log.first_update_ts(rows[r].user);
        const double tenure =
            first == kNever || first >= rows[r].t
                ? 0.0
                : static_cast<double>(rows[r].t - first) / static_cast<double>(kMsPerWeek);
        panel.covariates.push_back(tenure);
        panel.outcome.push_back(post[r][static_cast<int>(outcome)]);
    }
    return out;
}

double cohens_d_simple(double mean_value, double sd) {
    if (!(sd > 0)) throw std::invalid_argument("effect size needs a positive standard deviation");
    return mean_value / sd;
}

double cohens_d_did(const DidInput& in) {
    if (!(in.sd_pooled > 0)) {
        throw std::invalid_argument("effect size needs a positive standard deviation");
    }
    return ((in.control_before - in.control_after) -
            (in.participant_before - in.participant_after)) /
           in.sd_pooled;
}

long required_sample_size(const PowerRequest& req) {
    if (!(req.effect_size_rho > 0.0 && req.effect_size_rho < 1.0)) {
        throw std::invalid_argument("effect size rho must be in (0, 1)");
    }
    if (!(req.alpha > 0.0 && req.alpha < 1.0) || !(req.power > 0.0 && req.power < 1.0)) {
        throw std::invalid_argument("alpha and power must be in (0, 1)");
    }
    if (req.tails != 1 && req.tails != 2) {
        throw std::invalid_argument("tails must be 1 or 2");
    }

    const double rho = req.effect_size_rho;
    const double p_crit = req.tails == 1 ? 1.0 - req.alpha : 1.0 - req.alpha / 2.0;
    auto power_at = [&](long n) {
        const double df = static_cast<double>(n - 2);
        const double delta = rho * std::sqrt(static_cast<double>(n)) / std::sqrt(1.0 - rho * rho);
        const double t_crit = stats::student_t_quantile(p_crit, df);
        return 1.0 - stats::noncentral_t_cdf(t_crit, df, delta);
    };

    constexpr long kFloor = 4;
    constexpr long kCeiling = 10000000;
    if (power_at(kFloor) >= req.power) return kFloor;
    long lo = kFloor, hi = kFloor;
    while (power_at(hi) < req.power) {
        lo = hi;
        hi *= 2;
        if (hi > kCeiling) {
            throw std::runtime_error("no sample size up to 1e7 reaches the requested power");
        }
    }
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        (power_at(mid) >= req.power ? hi : lo) = mid;
    }
    return hi;
}

GroupDifferenceReport group_difference_report(const std::vector<MetricSamples>& metrics) {
    GroupDifferenceReport report;
    for (const auto& m : metrics) {
        if (m.a.empty() || m.b.empty()) {
            throw std::invalid_argument("group difference needs nonempty groups for metric '" +
                                        m.name + "'");
        }
        if (report.rows.empty()) {
            report.n_a = m.a.size();
            report.n_b = m.b.size();
        }
        GroupMetricRow row;
        row.metric = m.name;
        row.median_a = stats::median(m.a);
        row.median_b = stats::median(m.b);
        row.mean_a = stats::mean(m.a);
        row.mean_b = stats::mean(m.b);
        row.sd_a = m.a.size() > 1 ? stats::sample_sd(m.a) : 0.0;
        row.sd_b = m.b.size() > 1 ? stats::sample_sd(m.b) : 0.0;
        row.mean_diff = row.mean_a - row.mean_b;
        row.welch_p = stats::welch_t_test(m.a, m.b).p;
        row.cles = stats::common_language_effect(m.a, m.b);
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace rec

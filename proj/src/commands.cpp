#include "influence_gate/commands.hpp"

#include "influence_gate/logit_gate.hpp"
#include "influence_gate/mm_gate.hpp"
#include "reports.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

namespace influence_gate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
void parallel_for(std::size_t count, int threads, F&& f) {
  int workers = static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(threads, count)));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](int w) {
    try {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) f(i);
    } catch (...) {
      errors[w] = std::current_exception();
      next = count;
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output_dir);
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

ThetaPriorSpec logit_prior_spec(const LogitPriorConfig& lp, int k) {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(k);
  if (lp.family == "laplace") {
    Eigen::VectorXd scale(k);
    for (int j = 0; j < k; ++j) scale(j) = 1.0 / (lp.epsilon.size() == 1 ? lp.epsilon[0] : lp.epsilon[j]);
    return theta_prior::Laplace{zero, scale};
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(k, k) * lp.scale * lp.scale;
  if (lp.family == "normal") return theta_prior::Normal{zero, S};
  return theta_prior::StudentT{lp.dof, zero, S};
}

LinearPrior linear_prior_of(const LinearPriorConfig& lp, int k) {
  if (!lp.conjugate) return NoninformativePrior{};
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  if (!lp.theta_mean.empty()) {
    if (static_cast<int>(lp.theta_mean.size()) != k)
      throw ConfigError("prior.theta.mean needs one entry per design column");
    mean = Eigen::Map<const Eigen::VectorXd>(lp.theta_mean.data(), k);
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(k, k) * lp.theta_scale * lp.theta_scale;
  ThetaPriorSpec th = lp.theta_family == "normal" ? ThetaPriorSpec{theta_prior::Normal{mean, S}}
                                                  : ThetaPriorSpec{theta_prior::StudentT{lp.theta_dof, mean, S}};
  return ConjugatePrior{lp.alpha, lp.beta, th};
}

std::string join_labels(const DeletionSet& d) { return d.empty() ? "empty" : format_one_based(d); }

}  // namespace

int worker_threads() {
  if (const char* env = std::getenv("INFLUENCE_GATE_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError(std::string("INFLUENCE_GATE_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- context

ModelContext::ModelContext(const RunConfig& cfg) : ModelContext(cfg, load_csv(cfg.data_path, cfg.schema)) {}

ModelContext::ModelContext(const RunConfig& cfg, Dataset data) : cfg_(cfg), data_(std::move(data)) { init(); }

void ModelContext::init() {
  if (const auto* rd = std::get_if<RegressionData>(&data_)) {
    if (cfg_.model != ModelKind::Linear) throw ConfigError("dataset does not match the model");
    fit_ = std::make_shared<const LinearFit>(*rd);
    if (std::holds_alternative<ConjugatePrior>(linear_prior_of(cfg_.linear_prior, rd->k())))
      validate(std::get<ConjugatePrior>(linear_prior_of(cfg_.linear_prior, rd->k())).theta);
  } else if (const auto* ld = std::get_if<LogitData>(&data_)) {
    if (cfg_.model != ModelKind::Logit) throw ConfigError("dataset does not match the model");
    const auto& lp = cfg_.logit_prior;
    if (lp.family == "laplace") {
      if (lp.epsilon.size() == 1) {
        logit_epsilon_ = lp.epsilon[0];
      } else {
        // exp(-sum eps_j |b_j|): substitute g_j = eps_j b_j, unit rate on g.
        if (static_cast<int>(lp.epsilon.size()) != ld->k())
          throw ConfigError("logit.epsilon needs one entry or one per design column");
        Eigen::MatrixXd X = ld->design();
        for (int j = 0; j < ld->k(); ++j) X.col(j) /= lp.epsilon[j];
        scaled_logit_.emplace(X, ld->outcome());
        logit_epsilon_ = 1.0;
      }
    } else if (lp.family == "t") {
      logit_epsilon_ = 0.0;
    }
  } else if (cfg_.model != ModelKind::MM) {
    throw ConfigError("dataset does not match the model");
  }
}

int ModelContext::n() const {
  return std::visit([](const auto& d) { return d.n(); }, data_);
}

ModelBundle ModelContext::bundle() const {
  switch (cfg_.model) {
    case ModelKind::Linear: {
      const auto& d = std::get<RegressionData>(data_);
      return LinearBundle{d, linear_prior_of(cfg_.linear_prior, d.k())};
    }
    case ModelKind::MM:
      return MMBundle{std::get<MMData>(data_), cfg_.kappa_prior};
    case ModelKind::Logit: {
      const auto& d = std::get<LogitData>(data_);
      return LogitBundle{d, logit_prior_spec(cfg_.logit_prior, d.k())};
    }
  }
  throw ConfigError("unknown model");
}

MomentIndexReport ModelContext::moment_index(const DeletionSet& del) const {
  switch (cfg_.model) {
    case ModelKind::Linear: {
      if (del.empty()) return moment_index_linear(std::get<RegressionData>(data_), del,
                                                  linear_prior_of(cfg_.linear_prior, fit_->k()));
      return moment_index_linear(fit_->leverage(del), fit_->n(), fit_->k(),
                                 linear_prior_of(cfg_.linear_prior, fit_->k()));
    }
    case ModelKind::MM: {
      MMScanParams p;
      p.grid_size = cfg_.mm_grid_size;
      return moment_index_mm(std::get<MMData>(data_), del, p);
    }
    case ModelKind::Logit: {
      const auto& lp = cfg_.logit_prior;
      if (lp.family == "normal") {
        MomentIndexReport rep;
        rep.note = "prior thinner than every double exponential: all moments finite";
        return rep;
      }
      const LogitData& d = scaled_logit_ ? *scaled_logit_ : std::get<LogitData>(data_);
      return moment_index_logit(d, del, logit_epsilon_, lp.multistart);
    }
  }
  throw ConfigError("unknown model");
}

MomentVerdict ModelContext::verdict(const DeletionSet& del, double r) const {
  switch (cfg_.model) {
    case ModelKind::Linear: {
      LinearPrior prior = linear_prior_of(cfg_.linear_prior, fit_->k());
      if (del.empty()) return theorem31_verdict(std::get<RegressionData>(data_), del, r, prior);
      return theorem31_verdict(fit_->leverage(del), fit_->n(), fit_->k(), r, prior);
    }
    case ModelKind::MM: {
      const auto& d = std::get<MMData>(data_);
      return theorem41_verdict(d, del, r, scan_kappa(d, del, r, cfg_.mm_grid_size));
    }
    case ModelKind::Logit: {
      const auto& lp = cfg_.logit_prior;
      const LogitData& d = scaled_logit_ ? *scaled_logit_ : std::get<LogitData>(data_);
      TailClass tc;
      if (lp.family == "normal") tc.tag = TailClass::Tag::Thin;
      else if (lp.family == "t") tc.tag = TailClass::Tag::Thick;
      else tc = {TailClass::Tag::InFamily, {logit_epsilon_}};
      return corollary5_dispatch(d, del, r, tc, lp.multistart);
    }
  }
  throw ConfigError("unknown model");
}

std::optional<double> ModelContext::asymptotic_coefficient(const DeletionSet& del) const {
  if (cfg_.model != ModelKind::MM) return std::nullopt;
  const auto& c = std::get<MMData>(data_).concentration();
  double out = 0;
  for (int i = 0; i < c.size(); ++i) out += del.contains(i) ? -c(i) * c(i) : c(i) * c(i);
  return out;  // r = 2
}

double ModelContext::log_joint(const Eigen::VectorXd& s) const {
  const double log2pi = std::log(2 * std::numbers::pi);
  switch (cfg_.model) {
    case ModelKind::Linear: {
      const auto& d = std::get<RegressionData>(data_);
      const int k = d.k();
      double s2 = s(k);
      if (!(s2 > 0)) return -kInf;
      double rss = (d.response() - d.design() * s.head(k)).squaredNorm();
      double ll = -0.5 * d.n() * (log2pi + std::log(s2)) - rss / (2 * s2);
      LinearPrior prior = linear_prior_of(cfg_.linear_prior, k);
      if (const auto* cp = std::get_if<ConjugatePrior>(&prior))
        return ll + log_density(cp->theta, s.head(k)) +
               log_density(sigma2_prior::InverseGamma{cp->alpha, cp->beta}, s2);
      return ll - std::log(s2);
    }
    case ModelKind::MM: {
      const auto& d = std::get<MMData>(data_);
      double m = s(0), s2 = s(1), kappa = s(2);
      if (!(m > 0) || !(s2 > 0) || !(kappa > 0)) return -kInf;
      double ss = 0;
      for (int i = 0; i < d.n(); ++i) {
        double e = d.velocity()(i) - m * d.concentration()(i) / (kappa + d.concentration()(i));
        ss += e * e;
      }
      double t = kappa / cfg_.kappa_prior.scale;
      return -0.5 * d.n() * (log2pi + std::log(s2)) - ss / (2 * s2) - std::log(s2) -
             0.5 * (cfg_.kappa_prior.dof + 1) * std::log1p(t * t / cfg_.kappa_prior.dof);
    }
    case ModelKind::Logit: {
      const auto& d = std::get<LogitData>(data_);
      Eigen::VectorXd eta = d.design() * s;
      double ll = 0;
      for (int i = 0; i < d.n(); ++i) ll += d.outcome()(i) * eta(i) - softplus(eta(i));
      return ll + log_density(logit_prior_spec(cfg_.logit_prior, d.k()), s);
    }
  }
  return -kInf;
}

AdjustablePrior ModelContext::adjustable_prior(const DeletionSet& del) const {
  switch (cfg_.model) {
    case ModelKind::Linear: {
      LinearPrior prior = linear_prior_of(cfg_.linear_prior, fit_->k());
      if (const auto* cp = std::get_if<ConjugatePrior>(&prior)) return std::vector<ThetaPriorSpec>{cp->theta};
      return NoninformativeLinearPrior{fit_->n(), fit_->k(), del.cardinality()};
    }
    case ModelKind::MM:
      // flat on m
      return std::vector<ThetaPriorSpec>{theta_prior::Custom{{TailClass::Tag::Thick, {}}, false, true}};
    case ModelKind::Logit: {
      const auto& d = std::get<LogitData>(data_);
      return std::vector<ThetaPriorSpec>{logit_prior_spec(cfg_.logit_prior, d.k())};
    }
  }
  throw ConfigError("unknown model");
}

std::vector<DeletionSet> deletion_sets(const RunConfig& cfg, int n) {
  if (cfg.deletion.mode != DeletionSpec::Mode::Sets)
    throw ConfigError("this command needs deletion.sets");
  std::vector<DeletionSet> out;
  if (cfg.deletion.singletons) {
    for (int i = 0; i < n; ++i) out.push_back(deletion_set({i}, n));
  } else {
    for (const auto& s : cfg.deletion.sets) out.push_back(deletion_set(s, n));
  }
  return out;
}

// ---------------------------------------------------------------- gate

std::vector<GateRow> run_gate(const ModelContext& ctx, int threads) {
  auto sets = deletion_sets(ctx.config(), ctx.n());
  std::vector<GateRow> rows(sets.size());
  parallel_for(sets.size(), threads, [&](std::size_t i) {
    GateRow& row = rows[i];
    row.del = sets[i];
    row.report = ctx.moment_index(sets[i]);
    for (double r : ctx.config().r_values) row.verdicts.push_back(ctx.verdict(sets[i], r));
    row.asymptotic_coefficient = ctx.asymptotic_coefficient(sets[i]);
  });
  return rows;
}

std::vector<GateRow> cmd_gate(const RunConfig& cfg) {
  ModelContext ctx(cfg);
  auto rows = run_gate(ctx, worker_threads());

  std::vector<std::string> header{"deleted", "size", "r_a", "r_b", "r_c", "r_star", "binding", "capped"};
  for (double r : cfg.r_values) header.push_back("verdict_r" + reports::num(r));
  if (cfg.model == ModelKind::MM) header.push_back("asymptotic_coefficient");
  reports::CsvWriter csv(out_path(cfg, "gate.csv"), header);
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& row : rows) {
    const auto& rp = row.report;
    std::vector<std::string> cells{join_labels(row.del), std::to_string(row.del.cardinality()),
                                   reports::num(rp.r_a), reports::num(rp.r_b), reports::num(rp.r_c),
                                   reports::num(rp.r_star), to_string(rp.binding), rp.capped ? "true" : "false"};
    nlohmann::json jv = nlohmann::json::array();
    for (size_t j = 0; j < row.verdicts.size(); ++j) {
      cells.push_back(to_string(row.verdicts[j].tag));
      jv.push_back({{"r", cfg.r_values[j]},
                    {"verdict", to_string(row.verdicts[j].tag)},
                    {"detail", row.verdicts[j].detail}});
    }
    if (row.asymptotic_coefficient) cells.push_back(reports::num(*row.asymptotic_coefficient));
    csv.row(cells);
    nlohmann::json jr{{"deleted", row.del.indices()}, {"moment_index", reports::report_json(rp)},
                      {"verdicts", jv}};
    for (auto& v : jr["deleted"]) v = v.get<int>() + 1;
    if (row.asymptotic_coefficient) jr["asymptotic_coefficient"] = *row.asymptotic_coefficient;
    jrows.push_back(jr);
  }
  reports::write_json(out_path(cfg, "gate.json"),
                      {{"model", to_string(cfg.model)}, {"n", ctx.n()}, {"rows", jrows}}, "gate");
  return rows;
}

// ---------------------------------------------------------------- scan

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 v = 1;
  for (int i = 1; i <= k; ++i) {
    v = v * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (v > SIZE_MAX) return SIZE_MAX;
  }
  return static_cast<std::size_t>(v);
}

std::vector<int> subset_at(int n, int size, std::size_t pos) {
  std::vector<int> out;
  int start = 0;
  for (int slot = 0; slot < size; ++slot) {
    for (int i = start; i < n; ++i) {
      std::size_t c = binomial(n - i - 1, size - slot - 1);
      if (pos < c) {
        out.push_back(i);
        start = i + 1;
        break;
      }
      pos -= c;
    }
  }
  return out;
}

namespace {

std::vector<std::size_t> ascending_order(const std::vector<ScanRow>& rows, double ScanRow::*field) {
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return rows[a].*field < rows[b].*field; });
  return idx;
}

// Successor in lexicographic order; false past the last subset.
bool next_subset(std::vector<int>& s, int n) {
  int k = static_cast<int>(s.size());
  for (int i = k - 1; i >= 0; --i) {
    if (s[i] < n - k + i) {
      ++s[i];
      for (int j = i + 1; j < k; ++j) s[j] = s[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

ScanResult run_scan(const ModelContext& ctx, int threads) {
  const RunConfig& cfg = ctx.config();
  if (cfg.deletion.mode != DeletionSpec::Mode::ScanSize) throw ConfigError("scan needs deletion.scan_size");
  ScanResult res;
  res.n = ctx.n();
  res.size = cfg.deletion.scan_size;
  if (res.size > res.n) throw ConfigError("deletion.scan_size exceeds the number of cases");
  std::size_t total = binomial(res.n, res.size);
  if (static_cast<double>(total) > kScanBudget)
    throw BudgetError("C(" + std::to_string(res.n) + ", " + std::to_string(res.size) + ") = " +
                      std::to_string(total) + " subsets exceeds the scan budget of 1e7");
  res.rows.resize(total);

  // Contiguous shards; each worker walks its range with the successor rule.
  int workers = std::max(1, std::min<int>(threads, static_cast<int>(std::min<std::size_t>(total, 1 << 20))));
  std::size_t shards = static_cast<std::size_t>(workers) * 8;
  parallel_for(shards, workers, [&](std::size_t sh) {
    std::size_t lo = sh * total / shards, hi = (sh + 1) * total / shards;
    if (lo >= hi) return;
    std::vector<int> s = subset_at(res.n, res.size, lo);
    for (std::size_t pos = lo; pos < hi; ++pos) {
      MomentIndexReport rep = ctx.moment_index(deletion_set(s, res.n));
      res.rows[pos] = {rep.r_a, rep.r_b, rep.r_c, rep.r_star, rep.binding};
      next_subset(s, res.n);
    }
  });

  res.rank_ra = ascending_order(res.rows, &ScanRow::r_a);
  res.rank_rc = ascending_order(res.rows, &ScanRow::r_c);
  res.rank_star = ascending_order(res.rows, &ScanRow::r_star);
  std::size_t top = std::min<std::size_t>(cfg.scan_top, total);
  for (int c : cfg.scan_flag) {
    if (c >= res.n) throw DataError(DataFault::IndexOutOfRange, "scan.flag case out of range");
    ScanResult::Membership m{c, 0, 0, 0};
    auto count = [&](const std::vector<std::size_t>& rank) {
      int k = 0;
      for (std::size_t t = 0; t < top; ++t) {
        auto s = subset_at(res.n, res.size, rank[t]);
        k += std::binary_search(s.begin(), s.end(), c);
      }
      return k;
    };
    m.in_top_ra = count(res.rank_ra);
    m.in_top_rc = count(res.rank_rc);
    m.in_top_star = count(res.rank_star);
    res.membership.push_back(m);
  }
  return res;
}

ScanResult cmd_scan(const RunConfig& cfg) {
  ModelContext ctx(cfg);
  ScanResult res = run_scan(ctx, worker_threads());
  const std::vector<std::string> header{"subset", "r_a", "r_b", "r_c", "r_star", "binding"};
  auto label = [&](std::size_t pos) {
    return format_one_based(deletion_set(subset_at(res.n, res.size, pos), res.n));
  };
  auto cells = [&](std::size_t pos, const std::string& lab) {
    const ScanRow& r = res.rows[pos];
    return std::vector<std::string>{lab, reports::num(r.r_a), reports::num(r.r_b), reports::num(r.r_c),
                                    reports::num(r.r_star), to_string(r.binding)};
  };
  {
    reports::CsvWriter all(out_path(cfg, "scan.csv"), header);
    std::vector<int> s(res.size);
    std::iota(s.begin(), s.end(), 0);
    for (std::size_t pos = 0; pos < res.rows.size(); ++pos, next_subset(s, res.n))
      all.row(cells(pos, format_one_based(deletion_set(s, res.n))));
  }
  std::size_t top = std::min<std::size_t>(cfg.scan_top, res.rows.size());
  for (auto [name, rank] : {std::pair{"scan_rank_ra.csv", &res.rank_ra}, std::pair{"scan_rank_rc.csv", &res.rank_rc}}) {
    std::vector<std::string> h = header;
    h.insert(h.begin(), "rank");
    reports::CsvWriter w(out_path(cfg, name), h);
    for (std::size_t t = 0; t < top; ++t) {
      auto c = cells((*rank)[t], label((*rank)[t]));
      c.insert(c.begin(), std::to_string(t + 1));
      w.row(c);
    }
  }
  nlohmann::json mem = nlohmann::json::array();
  for (const auto& m : res.membership)
    mem.push_back({{"case", m.case_index + 1},
                   {"in_top_r_a", m.in_top_ra},
                   {"in_top_r_c", m.in_top_rc},
                   {"in_top_r_star", m.in_top_star}});
  reports::write_json(out_path(cfg, "scan.json"),
                      {{"model", to_string(cfg.model)},
                       {"n", res.n},
                       {"subset_size", res.size},
                       {"subsets", res.rows.size()},
                       {"top", top},
                       {"membership", mem}},
                      "scan");
  return res;
}

// ---------------------------------------------------------------- k-fold

KFoldResult run_kfold(const ModelContext& ctx, int threads) {
  const RunConfig& cfg = ctx.config();
  if (cfg.deletion.mode != DeletionSpec::Mode::KFold) throw ConfigError("kfold needs deletion.kfold");
  const int n = ctx.n();
  KFoldResult res;
  res.folds = cfg.deletion.folds;
  res.partitions = cfg.deletion.partitions;
  if (res.folds > n) throw ConfigError("deletion.kfold exceeds the number of cases");
  res.members.resize(res.partitions);
  res.r_star.assign(res.partitions, std::vector<double>(res.folds));
  for (int p = 0; p < res.partitions; ++p) {
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    if (!(res.partitions == 1 && res.folds == n)) {
      std::mt19937_64 rng(derive_seed(cfg.sampler.seed, 0x6b666f6c64ULL, p));
      std::shuffle(perm.begin(), perm.end(), rng);
    }
    res.members[p].assign(res.folds, {});
    for (int i = 0; i < n; ++i) res.members[p][i % res.folds].push_back(perm[i]);
    for (auto& f : res.members[p]) std::sort(f.begin(), f.end());
  }
  parallel_for(static_cast<std::size_t>(res.partitions) * res.folds, threads, [&](std::size_t t) {
    int p = static_cast<int>(t / res.folds), f = static_cast<int>(t % res.folds);
    res.r_star[p][f] = ctx.moment_index(deletion_set(res.members[p][f], n)).r_star;
  });
  for (const auto& row : res.r_star) {
    int below = static_cast<int>(std::count_if(row.begin(), row.end(), [](double r) { return r < 2; }));
    res.with_one_or_more_below_two += below >= 1;
    res.with_two_or_more_below_two += below >= 2;
    res.with_exactly_one_below_two += below == 1;
  }
  return res;
}

KFoldResult cmd_kfold_audit(const RunConfig& cfg) {
  ModelContext ctx(cfg);
  KFoldResult res = run_kfold(ctx, worker_threads());
  reports::CsvWriter csv(out_path(cfg, "kfold_partitions.csv"), {"partition", "fold", "members", "r_star"});
  for (int p = 0; p < res.partitions; ++p)
    for (int f = 0; f < res.folds; ++f)
      csv.row({std::to_string(p + 1), std::to_string(f + 1),
               format_one_based(deletion_set(res.members[p][f], ctx.n())), reports::num(res.r_star[p][f])});
  reports::write_json(out_path(cfg, "kfold.json"),
                      {{"model", to_string(cfg.model)},
                       {"n", ctx.n()},
                       {"folds", res.folds},
                       {"partitions", res.partitions},
                       {"partitions_with_one_or_more_below_2", res.with_one_or_more_below_two},
                       {"partitions_with_two_or_more_below_2", res.with_two_or_more_below_two},
                       {"partitions_with_exactly_one_below_2", res.with_exactly_one_below_two}},
                      "kfold");
  return res;
}

// ---------------------------------------------------------------- estimate

std::vector<EstimateRow> run_estimate(const ModelContext& ctx, const Draws& draws) {
  const RunConfig& cfg = ctx.config();
  auto sets = deletion_sets(cfg, ctx.n());
  const Eigen::Index M = draws.values.rows();
  std::optional<Eigen::VectorXd> log_q;
  std::vector<EstimateRow> out;
  for (const auto& del : sets) {
    WeightedSample ws = make_weighted_sample(ctx.data(), del, draws.values);
    GateInputs gi;
    gi.report = ctx.moment_index(del);
    for (const auto& req : cfg.measures) {
      MeasureAux aux;
      aux.coordinate = req.coordinate;
      std::optional<GSpec> g;
      switch (req.measure) {
        case Measure::Delta1: g = gspec::Polynomial{2}; break;
        case Measure::Delta2: g = gspec::Polynomial{4}; break;
        case Measure::L1: g = gspec::LikelihoodPower{2, cfg.likelihood_bounded}; break;
        case Measure::L2: g = gspec::LikelihoodPower{4, cfg.likelihood_bounded}; break;
        default: break;
      }
      GateInputs gm = gi;
      if (g) gm.adjusted_prior_ok = adjusted_prior_check(cfg.model, *g, ctx.adjustable_prior(del));

      if (req.coordinate >= 0 && req.coordinate >= draws.values.cols())
        throw ConfigError("measure coordinate exceeds the draw dimension");
      if (req.measure == Measure::Delta1 || req.measure == Measure::Delta2) {
        aux.values = draws.values.col(req.coordinate);
      } else if (req.measure == Measure::Bdd) {
        aux.values = (draws.values.col(req.coordinate).array() > req.threshold).cast<double>().matrix();
      } else if (req.measure == Measure::CPO) {
        Eigen::VectorXd lil(M);
        for (Eigen::Index m = 0; m < M; ++m)
          lil(m) = log_inverse_likelihood(ctx.data(), del, draws.values.row(m).transpose());
        aux.log_inverse_likelihood = lil;
      } else if (req.measure == Measure::L1 || req.measure == Measure::L2) {
        if (!cfg.log_c_hat) throw ConfigError("L1 and L2 need estimate.log_c_hat");
        aux.log_c_hat = cfg.log_c_hat;
        if (!log_q) {
          log_q = Eigen::VectorXd(M);
          for (Eigen::Index m = 0; m < M; ++m) (*log_q)(m) = ctx.log_joint(draws.values.row(m).transpose());
        }
        aux.log_q = log_q;
      }
      EstimateRow row{del, estimate_measure(ws, req.measure, aux, gm), {}};
      if (!row.estimate.gate.passed) row.advisory = kMixtureAdvisory;
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<EstimateRow> cmd_estimate(const RunConfig& cfg) {
  ModelContext ctx(cfg);
  Draws draws = draw_posterior(ctx.bundle(), cfg.sampler, cfg.chains, worker_threads());
  write_draws_csv(out_path(cfg, "draws.csv"), draws);
  auto rows = run_estimate(ctx, draws);

  reports::CsvWriter csv(out_path(cfg, "estimates.csv"),
                         {"deleted", "measure", "coordinate", "value", "standard_error", "gate",
                          "required_moments", "required_adjusted_moments", "available_r_star", "reason"});
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows) {
    const auto& e = r.estimate;
    csv.row({join_labels(r.del), to_string(e.measure), e.coordinate >= 0 ? std::to_string(e.coordinate + 1) : "",
             reports::num(e.value), e.standard_error ? reports::num(*e.standard_error) : "",
             e.gate.passed ? "passed" : "blocked", reports::num(e.gate.required_moments),
             reports::num(e.gate.required_adjusted_moments), reports::num(e.gate.available_r_star),
             e.gate.reason});
    nlohmann::json j{{"deleted", nlohmann::json::array()},
                     {"measure", to_string(e.measure)},
                     {"value", reports::jnum(e.value)},
                     {"gate",
                      {{"passed", e.gate.passed},
                       {"required_moments", e.gate.required_moments},
                       {"required_adjusted_moments", e.gate.required_adjusted_moments},
                       {"adjustment", e.gate.adjustment},
                       {"available_r_star", reports::jnum(e.gate.available_r_star)},
                       {"reason", e.gate.reason}}}};
    for (int i : r.del.indices()) j["deleted"].push_back(i + 1);
    if (e.coordinate >= 0) j["coordinate"] = e.coordinate + 1;
    if (e.standard_error) j["standard_error"] = reports::jnum(*e.standard_error);
    if (e.measure == Measure::Hellinger) j["out_of_range"] = e.out_of_range;
    if (!r.advisory.empty()) j["advisory"] = r.advisory;
    jrows.push_back(j);
  }
  reports::write_json(out_path(cfg, "estimates.json"),
                      {{"model", to_string(cfg.model)},
                       {"draws", draws.values.rows()},
                       {"acceptance_rate", draws.acceptance_rate},
                       {"rows", jrows}},
                      "estimate");
  return rows;
}

// ---------------------------------------------------------------- verify

VerifyResult cmd_verify(const RunConfig& cfg) {
  ModelContext ctx(cfg);
  VerifyResult res;
  res.sets = deletion_sets(cfg, ctx.n());
  const int threads = worker_threads();
  Draws draws = draw_posterior(ctx.bundle(), cfg.sampler, cfg.chains, threads);

  reports::CsvWriter csv(out_path(cfg, "tail.csv"),
                         {"deleted", "estimator", "top_fraction", "log_threshold", "exceedances", "estimate"});
  nlohmann::json jt = nlohmann::json::array();
  std::vector<reports::Series> survival;
  for (const auto& del : res.sets) {
    WeightedSample ws = make_weighted_sample(ctx.data(), del, draws.values);
    MomentIndexReport rep = ctx.moment_index(del);
    TailReport tr = tail_report(ws.log_weights, rep.r_star, cfg.top_fraction);
    std::string lab = join_labels(del);
    for (const auto& h : tr.sweep)
      csv.row({lab, "hill", reports::num(h.top_fraction), reports::num(h.threshold_log),
               std::to_string(h.exceedances), reports::num(h.estimate)});
    reports::Series s{"deleted " + lab, {}, {}, false};
    for (const auto& pt : tr.regression.points) {
      csv.row({lab, "survival", reports::num(cfg.top_fraction), reports::num(pt.log_threshold),
               std::to_string(pt.exceedances), reports::num(tr.regression.estimate)});
      s.x.push_back(pt.log_threshold);
      s.y.push_back(std::log(double(pt.exceedances) / draws.values.rows()));
    }
    if (!s.x.empty()) survival.push_back(std::move(s));
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& h : tr.sweep)
      sweep.push_back({{"top_fraction", h.top_fraction}, {"estimate", reports::jnum(h.estimate)},
                       {"exceedances", h.exceedances}});
    nlohmann::json j{{"deleted", nlohmann::json::array()},
                     {"analytic_r_star", reports::jnum(tr.analytic_r_star)},
                     {"hill_estimate", reports::jnum(tr.hill.estimate)},
                     {"top_fraction", tr.hill.top_fraction},
                     {"sweep", sweep},
                     {"regression_index", reports::jnum(tr.regression.estimate)},
                     {"degenerate", tr.degenerate},
                     {"agreement", tr.agreement ? nlohmann::json(*tr.agreement) : nlohmann::json(nullptr)}};
    for (int i : del.indices()) j["deleted"].push_back(i + 1);
    jt.push_back(j);
    res.tails.push_back(std::move(tr));
  }
  reports::write_json(out_path(cfg, "tail.json"),
                      {{"model", to_string(cfg.model)}, {"draws", draws.values.rows()}, {"rows", jt}}, "tail");

  // Variance scaling needs fresh exact draws at every M: linear noninformative only.
  auto first = std::find_if(res.sets.begin(), res.sets.end(), [](const DeletionSet& d) { return !d.empty(); });
  bool exact = cfg.model == ModelKind::Linear && !cfg.linear_prior.conjugate;
  if (exact && first != res.sets.end()) {
    const auto& d = std::get<RegressionData>(ctx.data());
    res.scaling = clt_scaling_audit(linear_weight_mean_estimator(d, *first), cfg.scaling_grid,
                                    cfg.scaling_replications, cfg.sampler.seed, threads);
    reports::CsvWriter sc(out_path(cfg, "scaling.csv"), {"m", "variance"});
    for (size_t g = 0; g < res.scaling->m_grid.size(); ++g)
      sc.row({std::to_string(res.scaling->m_grid[g]), reports::num(res.scaling->variance_at_m[g])});
  } else {
    res.scaling_note = exact ? "no non-empty deletion set" : "scaling audit needs the exact linear sampler";
  }
  nlohmann::json js{{"note", res.scaling_note}};
  if (res.scaling) {
    js["deleted"] = nlohmann::json::array();
    for (int i : first->indices()) js["deleted"].push_back(i + 1);
    js["m_grid"] = res.scaling->m_grid;
    js["replications"] = res.scaling->replications;
    js["variance_at_m"] = nlohmann::json::array();
    for (double v : res.scaling->variance_at_m) js["variance_at_m"].push_back(reports::jnum(v));
    js["loglog_slope"] = res.scaling->loglog_slope ? nlohmann::json(*res.scaling->loglog_slope) : nlohmann::json(nullptr);
  }
  reports::write_json(out_path(cfg, "scaling.json"), js, "scaling");

  if (cfg.plots) {
    if (!survival.empty())
      reports::write_svg_plot(out_path(cfg, "survival.svg"), "Weight survival", "log threshold",
                              "log P(W > t)", survival);
    if (res.scaling && res.scaling->loglog_slope) {
      reports::Series pts{"variance", {}, {}, true};
      for (size_t g = 0; g < res.scaling->m_grid.size(); ++g) {
        pts.x.push_back(std::log10(double(res.scaling->m_grid[g])));
        pts.y.push_back(std::log10(res.scaling->variance_at_m[g]));
      }
      reports::Series ref{"slope -1", {pts.x.front(), pts.x.back()},
                          {pts.y.front(), pts.y.front() - (pts.x.back() - pts.x.front())}, false};
      reports::write_svg_plot(out_path(cfg, "scaling.svg"), "Estimator variance", "log10 M",
                              "log10 variance", {pts, ref});
    }
  }
  return res;
}

}  // namespace influence_gate

#include "opfgen/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

#include "opfgen/acopf.hpp"
#include "opfgen/errors.hpp"
#include "opfgen/log.hpp"
#include "opfgen/polytope.hpp"
#include "opfgen/rng.hpp"
#include "opfgen/schedule.hpp"

namespace opfgen {

namespace {

enum Stream : std::uint64_t { kTargets = 1, kInstance = 2 };

constexpr int kMaxTopUpBatches = 1000;

struct Task {
  int batch = 0;
  long index = 0;
  double target = 0.0;
  std::uint64_t seed = 0;
};

struct Outcome {
  bool feasible = false;
  std::optional<OpfProblem> prob;
  OpfSolution sol;
  std::string failure;
  double p_tot = 0.0;
  double seconds = -1.0;
};

class Runner {
 public:
  Runner(const Network& net, const GenerationConfig& cfg) : net_(net), cfg_(cfg) {
    c_d_ = resolve_slack_penalty(net, cfg.slack_penalty);
    if (cfg.method == Method::mx) {
      support_ = support(net, cfg.delta_p);
      epsilon_ = cfg.epsilon_fraction * support_->width();
      space_ = build_load_polytope(net, cfg.delta_p, cfg.delta_q, cfg.delta_pf, cfg.alpha_min, cfg.alpha_max);
    } else {
      space_ = build_box_space(net, cfg.delta_p, cfg.delta_q);
    }
  }

  Outcome run(const Task& t) const {
    Outcome o;
    try {
      LoadSetpoint sp;
      std::optional<LoadPolytope> sliced;
      if (cfg_.method == Method::mx) {
        sliced = slice(space_, t.target, epsilon_);
        const Eigen::VectorXd x = sample_load_space(*sliced, t.seed, 1).front();
        const Eigen::Index nd = space_.num_loads;
        sp = {x.head(nd), x.tail(nd), t.target, epsilon_};
      } else {
        sp = independent_sample(t.seed);
      }
      o.p_tot = sp.p_tot_target;
      o.prob = build_problem(net_, sp, sliced ? *sliced : space_, c_d_);
      const auto t0 = std::chrono::steady_clock::now();
      o.sol = solve(*o.prob, cfg_.solver);
      o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (o.sol.status != SolveStatus::converged) {
        o.failure = to_string(o.sol.status);
      } else {
        const ValidationReport rep = validate(o.sol, net_, *o.prob);
        o.feasible = rep.passed();
        if (!o.feasible) {
          o.failure = "validation-failure:" + rep.worst_class();
          log().warn("batch {} index {}: validation failed, {} residual {:.3e}", t.batch, t.index, rep.worst_class(),
                     rep.max_residual());
        }
      }
      log().debug("instance batch={} index={} iterations={} status={} kkt_residual={:.3e} max_slack={:.3e}", t.batch,
                  t.index, o.sol.iterations, to_string(o.sol.status), o.sol.kkt_residual, o.sol.max_slack());
    } catch (const InfeasibleSpace& e) {
      o.failure = "empty-slice";
      o.p_tot = t.target;
    } catch (const Error& e) {
      o.failure = std::string("error: ") + e.what();
      o.p_tot = t.target;
    }
    return o;
  }

  // Each coordinate uniform on its box; zero-width coordinates sit at their value.
  LoadSetpoint independent_sample(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::Index nd = space_.num_loads;
    LoadSetpoint sp;
    sp.p_hat.resize(nd);
    sp.q_hat.resize(nd);
    for (Eigen::Index d = 0; d < nd; ++d) sp.p_hat(d) = space_.p_min(d) + unit(rng) * (space_.p_max(d) - space_.p_min(d));
    for (Eigen::Index d = 0; d < nd; ++d) sp.q_hat(d) = space_.q_min(d) + unit(rng) * (space_.q_max(d) - space_.q_min(d));
    sp.p_tot_target = sp.p_hat.sum();
    return sp;
  }

  std::vector<Outcome> run_batch(const std::vector<Task>& tasks) const {
    std::vector<Outcome> out(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
      for (std::size_t i = next++; i < tasks.size(); i = next++) {
        try {
          out[i] = run(tasks[i]);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    };
    const int n = std::min<int>(cfg_.workers, static_cast<int>(tasks.size()));
    if (n <= 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < n; ++w) pool.emplace_back(work);
      for (std::thread& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
  }

  const std::optional<TotalLoadSupport>& support_range() const { return support_; }
  double epsilon() const { return epsilon_; }
  double slack_penalty() const { return c_d_; }

 private:
  const Network& net_;
  const GenerationConfig& cfg_;
  LoadPolytope space_;
  std::optional<TotalLoadSupport> support_;
  double epsilon_ = 0.0;
  double c_d_ = 0.0;
};

}  // namespace

GenerationResult generate(const Network& net, const GenerationConfig& cfg, const std::filesystem::path& out,
                          const ProgressFn& progress) {
  cfg.validate();
  const Runner gen(net, cfg);
  DatasetWriter writer(out, net);

  DatasetMeta meta;
  meta.case_name = net.case_name;
  meta.base_mva = net.base_mva;
  meta.network_fingerprint = fingerprint(net);
  meta.config = cfg;
  meta.support = gen.support_range();
  meta.epsilon = gen.epsilon();
  meta.slack_penalty = gen.slack_penalty();
  meta.angle_limits_defaulted = net.angle_limits_defaulted();

  GenerationResult result;
  ConvergedSet converged;
  std::optional<TotalLoadSupport> current = gen.support_range();
  std::optional<WeightedDensity> density;
  const long target_k = cfg.target_k.value_or(0);

  for (int b = 0;; ++b) {
    if (target_k > 0) {
      if (writer.instances() >= target_k) break;
      if (b >= cfg.batches + kMaxTopUpBatches)
        throw GenerationFailed("target K not reached after " + std::to_string(b) + " batches");
    } else if (b >= cfg.batches) {
      break;
    }

    std::vector<Task> tasks(static_cast<std::size_t>(cfg.samples));
    if (cfg.method == Method::mx) {
      const std::uint64_t ts = derive_seed(cfg.seed, static_cast<std::uint64_t>(b), 0, kTargets);
      std::vector<double> targets;
      if (b == 0 || !density)
        targets = draw_uniform(*current, tasks.size(), ts);
      else
        targets = draw_weighted(*density, tasks.size(), ts);
      for (std::size_t i = 0; i < tasks.size(); ++i) tasks[i].target = targets[i];
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      tasks[i].batch = b;
      tasks[i].index = static_cast<long>(i);
      tasks[i].seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(b), i, kInstance);
    }

    const std::vector<Outcome> outcomes = gen.run_batch(tasks);

    BatchProgress bp;
    bp.batch = b;
    BatchSchedule sched{b, {}};
    std::vector<Attempt> attempts;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const Outcome& o = outcomes[i];
      if (target_k > 0 && writer.instances() >= target_k) break;
      ++bp.attempted;
      sched.targets.push_back(o.p_tot);
      attempts.push_back({o.p_tot, o.feasible});
      if (o.seconds >= 0.0) result.solve_seconds.push_back(o.seconds);
      if (o.feasible) {
        writer.append_instance(*o.prob, o.sol, b);
        converged.add(o.p_tot, b);
        ++bp.converged;
      } else {
        writer.append_failure({b, static_cast<long>(i), o.p_tot, o.failure});
      }
    }
    result.attempted += bp.attempted;
    bp.total = writer.instances();
    meta.schedule.push_back(std::move(sched));
    result.batches.push_back(bp);
    log().info("batch {}: {} attempted, {} converged, K = {}", b, bp.attempted, bp.converged, bp.total);
    if (progress) progress(bp);

    if (cfg.method == Method::mx) {
      if (b == 0) {
        current = truncate_support(*current, converged, attempts);
        meta.truncated_support = current;
      }
      if (converged.size() >= 2) density = fit_weighted(converged, *current, cfg.eta);
    }
  }

  if (writer.instances() == 0) {
    meta.attempted = result.attempted;
    writer.finish(meta);
    throw GenerationFailed("no instance converged in " + std::to_string(result.attempted) + " attempts");
  }
  meta.attempted = result.attempted;
  result.handle = writer.finish(meta);
  return result;
}

}  // namespace opfgen

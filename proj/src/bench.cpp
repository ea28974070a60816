// SPDX-License-Identifier: Apache-2.0
#include "spx/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "spx/alloc_tracker.hpp"
#include "spx/mesh_collision.hpp"
#include "spx/parallel.hpp"

namespace spx {

const char* to_string(BenchMethod m) { return m == BenchMethod::Sphere ? "sphere" : "mesh"; }

void validate(const BenchConfig& cfg) {
    if (cfg.repetitions < 3) throw ConfigError("repetitions must be >= 3");
    if (cfg.warmup < 0) throw ConfigError("warmup must be >= 0");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (cfg.frame_counts.empty()) throw ConfigError("no frame counts");
    for (std::size_t i = 1; i < cfg.frame_counts.size(); ++i) {
        const auto a = cfg.frame_counts[i - 1];
        const auto b = cfg.frame_counts[i];
        if (a == 0 || (b != 0 && b <= a)) throw ConfigError("frame counts must be ascending (0 = all frames, last)");
    }
}

std::vector<std::size_t> subsample_frames(std::size_t total, std::size_t n) {
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i * total / n;
    return out;
}

namespace {

template <class T>
T median_of(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : static_cast<T>((v[m - 1] + v[m]) / 2);
}

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg, const SphereSet& spheres, const SphereBlendWeights& bw,
                          const Skeleton& skeleton, const Motion& motion, const PairMask& mask,
                          const std::vector<TriangleMesh>& per_frame_meshes) {
    validate(cfg);
    const std::size_t total = motion.size();
    if (total == 0) throw AssetMismatch("motion has no frames");
    const bool want_mesh = std::find(cfg.methods.begin(), cfg.methods.end(), BenchMethod::Mesh) != cfg.methods.end();
    if (want_mesh && per_frame_meshes.size() != total) {
        throw AssetMismatch("motion has " + std::to_string(total) + " frames but " +
                            std::to_string(per_frame_meshes.size()) + " meshes were given");
    }
    if (mask.sphere_count != spheres.size() || bw.num_spheres() != spheres.size()) {
        throw AssetMismatch("sphere count differs between spheres, blend weights and pair mask");
    }
    for (auto n : cfg.frame_counts) {
        if (n > total) throw AssetMismatch("frame count " + std::to_string(n) + " exceeds motion length");
    }

    const int saved_threads = num_threads();
    set_num_threads(cfg.threads);
    BenchResult result;
    for (BenchMethod method : cfg.methods) {
        double last_per_frame = 0;
        for (std::size_t requested : cfg.frame_counts) {
            const std::size_t n = requested == 0 ? total : requested;
            const auto idx = subsample_frames(total, n);
            BenchRecord rec;
            rec.method = method;
            rec.frame_count = n;
            rec.threads = cfg.threads;
            if (method == BenchMethod::Mesh && last_per_frame * static_cast<double>(n) > cfg.mesh_time_budget) {
                rec.feasible = false;
                result.records.push_back(rec);
                continue;
            }
            // Inputs are prepared outside the measured region.
            Motion sub;
            sub.fps = motion.fps;
            std::vector<TriangleMesh> meshes;
            for (auto i : idx) {
                if (method == BenchMethod::Sphere) {
                    sub.frames.push_back(motion.frames[i]);
                } else {
                    meshes.push_back(per_frame_meshes[i]);
                }
            }
            auto evaluate = [&] {
                return method == BenchMethod::Sphere ? si_loss(spheres, bw, skeleton, sub, mask).value
                                                     : mesh_si_loss(meshes).value;
            };
            for (int w = 0; w < cfg.warmup; ++w) evaluate();
            std::vector<double> times;
            std::vector<std::int64_t> peaks;
            for (int rep = 0; rep < cfg.repetitions; ++rep) {
                BenchRun run;
                run.method = method;
                run.frames = n;
                run.rep = rep;
                run.threads = cfg.threads;
                {
                    mem::PeakScope scope;
                    const auto t0 = std::chrono::steady_clock::now();
                    run.loss = evaluate();
                    run.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    run.peak_bytes = scope.peak();
                }
                times.push_back(run.wall_s);
                peaks.push_back(run.peak_bytes);
                rec.loss = run.loss;
                result.runs.push_back(run);
            }
            rec.median_s = median_of(times);
            rec.mean_s = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
            rec.min_s = *std::min_element(times.begin(), times.end());
            rec.peak_bytes = median_of(peaks);
            last_per_frame = rec.median_s / static_cast<double>(n);
            result.records.push_back(rec);
        }
    }
    set_num_threads(saved_threads);
    return result;
}

std::string bench_runs_csv(const BenchResult& result) {
    std::string out = "method,frames,rep,wall_s,peak_bytes,loss,threads,status\n";
    char buf[256];
    for (const auto& r : result.runs) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%d,%.9g,%lld,%.17g,%d,OK\n", to_string(r.method), r.frames, r.rep,
                      r.wall_s, static_cast<long long>(r.peak_bytes), r.loss, r.threads);
        out += buf;
    }
    for (const auto& rec : result.records) {
        if (rec.feasible) continue;
        std::snprintf(buf, sizeof buf, "%s,%zu,,,,,%d,INFEASIBLE\n", to_string(rec.method), rec.frame_count, rec.threads);
        out += buf;
    }
    return out;
}

std::string emit_plot_data(const std::vector<BenchRecord>& records) {
    if (records.empty()) throw ConfigError("no benchmark records to plot");
    std::string out = "method,frames,metric,value,status\n";
    char buf[256];
    for (const auto& r : records) {
        if (r.feasible) {
            std::snprintf(buf, sizeof buf, "%s,%zu,time_s,%.9g,OK\n%s,%zu,peak_bytes,%lld,OK\n", to_string(r.method),
                          r.frame_count, r.median_s, to_string(r.method), r.frame_count,
                          static_cast<long long>(r.peak_bytes));
        } else {
            std::snprintf(buf, sizeof buf, "%s,%zu,time_s,,INFEASIBLE\n%s,%zu,peak_bytes,,INFEASIBLE\n",
                          to_string(r.method), r.frame_count, to_string(r.method), r.frame_count);
        }
        out += buf;
    }
    return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) return 0;
    double mx = 0;
    double my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0;
    double sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxx > 0 ? sxy / sxx : 0;
}

nlohmann::ordered_json bench_summary(const std::vector<BenchRecord>& records) {
    using J = nlohmann::ordered_json;
    auto find = [&](BenchMethod m, std::size_t n) -> const BenchRecord* {
        for (const auto& r : records) {
            if (r.method == m && r.frame_count == n && r.feasible) return &r;
        }
        return nullptr;
    };
    J comparisons = J::array();
    std::vector<std::size_t> counts;
    for (const auto& r : records) {
        if (std::find(counts.begin(), counts.end(), r.frame_count) == counts.end()) counts.push_back(r.frame_count);
    }
    for (auto n : counts) {
        const auto* s = find(BenchMethod::Sphere, n);
        const auto* m = find(BenchMethod::Mesh, n);
        if (!s || !m) continue;
        const double speedup = s->median_s > 0 ? m->median_s / s->median_s : 0;
        const double mem_ratio = m->peak_bytes > 0 ? static_cast<double>(s->peak_bytes) / static_cast<double>(m->peak_bytes) : 0;
        comparisons.push_back(J{{"frames", n},
                                {"speedup", speedup},
                                {"time_reduction_pct", 100.0 * (1.0 - 1.0 / std::max(speedup, 1e-300))},
                                {"memory_ratio", mem_ratio},
                                {"memory_reduction_pct", 100.0 * (1.0 - mem_ratio)}});
    }
    J growth = J::object();
    for (BenchMethod method : {BenchMethod::Sphere, BenchMethod::Mesh}) {
        std::vector<double> x;
        std::vector<double> t;
        std::vector<double> b;
        for (const auto& r : records) {
            if (r.method != method || !r.feasible) continue;
            x.push_back(static_cast<double>(r.frame_count));
            t.push_back(std::max(r.median_s, 1e-12));
            b.push_back(std::max(static_cast<double>(r.peak_bytes), 1.0));
        }
        if (x.empty()) continue;
        growth[to_string(method)] = J{{"time_exponent", loglog_slope(x, t)}, {"memory_exponent", loglog_slope(x, b)}};
    }
    return J{{"comparisons", comparisons}, {"growth", growth}};
}

}  // namespace spx

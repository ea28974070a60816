// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "spx/mesh.hpp"
#include "spx/si_loss.hpp"

namespace spx {

enum class BenchMethod { Sphere, Mesh };
const char* to_string(BenchMethod m);

struct BenchConfig {
    // 0 stands for the full motion length.
    std::vector<std::size_t> frame_counts = {1, 2, 4, 8, 16, 0};
    int repetitions = 5;
    int warmup = 1;
    std::vector<BenchMethod> methods = {BenchMethod::Sphere, BenchMethod::Mesh};
    int threads = 1;
    // Mesh runs predicted to exceed this (from the previous frame count) are
    // skipped and reported as INFEASIBLE.
    double mesh_time_budget = 120.0;
};

void validate(const BenchConfig& cfg);

// One timed evaluation.
struct BenchRun {
    BenchMethod method = BenchMethod::Sphere;
    std::size_t frames = 0;
    int rep = 0;
    double wall_s = 0;
    std::int64_t peak_bytes = 0;
    Scalar loss = 0;
    int threads = 1;
};

struct BenchRecord {
    BenchMethod method = BenchMethod::Sphere;
    std::size_t frame_count = 0;
    double median_s = 0;
    double mean_s = 0;
    double min_s = 0;
    std::int64_t peak_bytes = 0;  // median over repetitions
    Scalar loss = 0;
    int threads = 1;
    bool feasible = true;
};

struct BenchResult {
    std::vector<BenchRun> runs;
    std::vector<BenchRecord> records;
};

// Frames i * N / n for i < n.
std::vector<std::size_t> subsample_frames(std::size_t total, std::size_t n);

// Sphere method: si_loss on the subsampled motion. Mesh method:
// mesh_si_loss on the matching posed meshes. Throws AssetMismatch.
BenchResult run_benchmark(const BenchConfig& cfg, const SphereSet& spheres, const SphereBlendWeights& bw,
                          const Skeleton& skeleton, const Motion& motion, const PairMask& mask,
                          const std::vector<TriangleMesh>& per_frame_meshes);

// method,frames,rep,wall_s,peak_bytes,loss,threads,status
std::string bench_runs_csv(const BenchResult& result);

// One row per (method, frames, metric); throws ConfigError when empty.
std::string emit_plot_data(const std::vector<BenchRecord>& records);

// Per frame count: mesh/sphere speedup and memory ratio, plus log-log
// growth exponents of time and memory per method.
nlohmann::ordered_json bench_summary(const std::vector<BenchRecord>& records);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace spx

// SPDX-License-Identifier: Apache-2.0
#include "spx/sphere_proxy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "spx/parallel.hpp"
#include "spx/rng.hpp"
#include "spx/si_metric.hpp"

namespace spx {

void validate(const SphereSet& spheres) {
    if (spheres.size() < 1) throw ConfigError("sphere set is empty");
    if (spheres.centers.rows() != spheres.size()) {
        throw ConfigError("sphere set has " + std::to_string(spheres.centers.rows()) + " centers but " +
                          std::to_string(spheres.size()) + " radii");
    }
    if (!spheres.centers.allFinite() || !spheres.radii.allFinite()) throw ConfigError("non-finite sphere parameter");
    if ((spheres.radii.array() <= 0).any()) throw ConfigError("sphere radii must be positive");
}

Scalar sphere_set_sdf(const SphereSet& spheres, const Vec3& p, Eigen::Index* arg) {
    if (spheres.size() == 0) {
        if (arg) *arg = -1;
        return std::numeric_limits<Scalar>::infinity();
    }
    // Seeded with sphere 0 so a NaN parameter propagates instead of leaving
    // the argmin unset.
    Scalar best = sphere_distance(p, spheres.center(0), spheres.radii[0]);
    Eigen::Index best_i = 0;
    for (Eigen::Index i = 1; i < spheres.size(); ++i) {
        const Scalar d = sphere_distance(p, spheres.center(i), spheres.radii[i]);
        if (d < best) {
            best = d;
            best_i = i;
        }
    }
    if (arg) *arg = best_i;
    return best;
}

SphereTree::SphereTree(const SphereSet& spheres, int leaf_size)
    : spheres_(spheres), leaf_size_(std::max(1, leaf_size)) {
    order_.resize(static_cast<std::size_t>(spheres_.size()));
    std::iota(order_.begin(), order_.end(), 0);
    if (!order_.empty()) build(0, static_cast<int>(order_.size()));
}

int SphereTree::build(int first, int count) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Node node;
    for (int k = first; k < first + count; ++k) {
        const int i = order_[static_cast<std::size_t>(k)];
        node.centers.extend(spheres_.center(i));
        node.max_radius = std::max(node.max_radius, spheres_.radii[i]);
    }
    node.first = first;
    node.count = count;
    if (count > leaf_size_) {
        int axis = 0;
        node.centers.extent().maxCoeff(&axis);
        auto begin = order_.begin() + first;
        const int mid = count / 2;
        std::nth_element(begin, begin + mid, begin + count, [&](int a, int b) {
            return spheres_.centers(a, axis) < spheres_.centers(b, axis) ||
                   (spheres_.centers(a, axis) == spheres_.centers(b, axis) && a < b);
        });
        node.left = build(first, mid);
        node.right = build(first + mid, count - mid);
    }
    nodes_[static_cast<std::size_t>(index)] = node;
    return index;
}

Scalar SphereTree::sdf(const Vec3& p) const {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    if (nodes_.empty()) return best;
    int stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
        // Every sphere below has |p - z| >= box distance and r <= max_radius.
        if (node.centers.distance(p) - node.max_radius > best) continue;
        if (node.left < 0) {
            for (int k = node.first; k < node.first + node.count; ++k) {
                const int i = order_[static_cast<std::size_t>(k)];
                best = std::min(best, sphere_distance(p, spheres_.center(i), spheres_.radii[i]));
            }
            continue;
        }
        const Scalar dl = nodes_[static_cast<std::size_t>(node.left)].centers.distance(p);
        const Scalar dr = nodes_[static_cast<std::size_t>(node.right)].centers.distance(p);
        if (dl <= dr) {
            stack[top++] = node.right;
            stack[top++] = node.left;
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    return best;
}

SphereGradient operator*(Scalar s, const SphereGradient& g) { return {s * g.centers, s * g.radii}; }

namespace {

constexpr std::size_t kBlock = 1024;

// d|p - z| / dz, zero at coincidence.
Vec3 unit_from(const Vec3& p, const Vec3& z) {
    const Vec3 d = z - p;
    const Scalar n = d.norm();
    return n > 0 ? Vec3(d / n) : Vec3::Zero();
}

// Splits [0, n) into fixed blocks, evaluates each block into its own partial
// result and reduces the partials pairwise in block order. The outcome only
// depends on n, never on the thread count.
template <class Partial, class Fn>
Partial blocked_reduce(std::size_t n, const Partial& zero, Fn&& fn) {
    const std::size_t blocks = std::max<std::size_t>(1, (n + kBlock - 1) / kBlock);
    std::vector<Partial> partial(blocks, zero);
    parallel_for(blocks, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) fn(b * kBlock, std::min(n, (b + 1) * kBlock), partial[b]);
    });
    for (std::size_t width = 1; width < blocks; width *= 2) {
        for (std::size_t i = 0; i + width < blocks; i += 2 * width) {
            partial[i].value += partial[i + width].value;
            partial[i].grad += partial[i + width].grad;
        }
    }
    return std::move(partial[0]);
}

}  // namespace

LossValue loss_sdf(const SphereSet& spheres, SampleSpan batch) {
    const Eigen::Index s_count = spheres.size();
    LossValue zero{0, SphereGradient::zeros(s_count)};
    if (batch.empty()) return zero;
    LossValue out = blocked_reduce(batch.size(), zero, [&](std::size_t b, std::size_t e, LossValue& acc) {
        for (std::size_t k = b; k < e; ++k) {
            const auto& s = batch[k];
            Eigen::Index i = 0;
            const Scalar ds = sphere_set_sdf(spheres, s.point, &i);
            Scalar slope = 0;
            if (s.distance < 0) {
                if (ds > 0) {
                    acc.value += ds;
                    slope = 1;
                }
            } else {
                const Scalar diff = ds - s.distance;
                acc.value += std::abs(diff);
                slope = diff > 0 ? 1 : (diff < 0 ? -1 : 0);
            }
            if (slope != 0) {
                acc.grad.centers.row(i) += slope * unit_from(s.point, spheres.center(i)).transpose();
                acc.grad.radii[i] -= slope;
            }
        }
    });
    const Scalar inv = 1.0 / static_cast<Scalar>(batch.size());
    out.value *= inv;
    out.grad = inv * out.grad;
    return out;
}

LossValue loss_emptiness(const SphereSet& spheres, SampleSpan batch) {
    const Eigen::Index s_count = spheres.size();
    LossValue out{0, SphereGradient::zeros(s_count)};
    if (batch.empty()) return out;
    std::vector<Scalar> term(static_cast<std::size_t>(s_count), 0);
    parallel_for(static_cast<std::size_t>(s_count), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t si = i0; si < i1; ++si) {
            const auto i = static_cast<Eigen::Index>(si);
            const Vec3 z = spheres.center(i);
            std::size_t nearest = 0;
            Scalar nearest_sq = std::numeric_limits<Scalar>::infinity();
            for (std::size_t k = 0; k < batch.size(); ++k) {
                const Scalar d2 = (batch[k].point - z).squaredNorm();
                if (d2 < nearest_sq) {
                    nearest_sq = d2;
                    nearest = k;
                }
            }
            const auto& s = batch[nearest];
            if (s.distance >= 0) continue;
            const Scalar gap = std::sqrt(nearest_sq) - spheres.radii[i];
            if (gap > 0) {
                term[si] = gap;
                out.grad.centers.row(i) = unit_from(s.point, z).transpose();
                out.grad.radii[i] = -1;
            }
        }
    });
    const Scalar inv = 1.0 / static_cast<Scalar>(s_count);
    for (Scalar t : term) out.value += t;
    out.value *= inv;
    out.grad = inv * out.grad;
    return out;
}

LossValue loss_is(const SphereSet& spheres) {
    const Eigen::Index s_count = spheres.size();
    LossValue out{0, SphereGradient::zeros(s_count)};
    for (Eigen::Index i = 0; i < s_count; ++i) {
        const Vec3 zi = spheres.center(i);
        for (Eigen::Index j = i + 1; j < s_count; ++j) {
            const Vec3 zj = spheres.center(j);
            const Scalar b = intersection_distance(zi, spheres.radii[i], zj, spheres.radii[j]);
            if (b <= 0) continue;
            out.value += b;
            out.grad.radii[i] += 1;
            out.grad.radii[j] += 1;
            const Vec3 u = unit_from(zj, zi);  // d|zi - zj| / dzi
            out.grad.centers.row(i) -= u.transpose();
            out.grad.centers.row(j) += u.transpose();
        }
    }
    const Scalar inv = 1.0 / static_cast<Scalar>(s_count * s_count);
    out.value *= inv;
    out.grad = inv * out.grad;
    return out;
}

FitLosses evaluate_fit_loss(const SphereSet& spheres, SampleSpan batch, Scalar lambda_emptiness,
                            Scalar lambda_is) {
    auto sdf = loss_sdf(spheres, batch);
    auto empty = loss_emptiness(spheres, batch);
    auto is = loss_is(spheres);
    FitLosses out;
    out.sdf = sdf.value;
    out.emptiness = empty.value;
    out.is = is.value;
    out.total = sdf.value + lambda_emptiness * empty.value + lambda_is * is.value;
    out.grad = std::move(sdf.grad);
    out.grad += lambda_emptiness * empty.grad;
    out.grad += lambda_is * is.grad;
    return out;
}

void Adam::step(Eigen::Ref<Vector> x, const Vector& grad, Scalar lr) {
    ++t_;
    m_ = params_.beta1 * m_ + (1 - params_.beta1) * grad;
    v_ = params_.beta2 * v_ + (1 - params_.beta2) * grad.cwiseAbs2();
    const Scalar c1 = 1 - std::pow(params_.beta1, static_cast<Scalar>(t_));
    const Scalar c2 = 1 - std::pow(params_.beta2, static_cast<Scalar>(t_));
    x.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + params_.epsilon);
}

void validate(const FitConfig& cfg) {
    if (cfg.spheres < 1) throw ConfigError("sphere count must be >= 1");
    if (cfg.lambda_emptiness < 0 || cfg.lambda_is < 0) throw ConfigError("loss weights must be >= 0");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.steps_per_epoch < 0) {
        throw ConfigError("epochs and batch_size must be >= 1");
    }
    if (!(cfg.learning_rate > 0) || !(cfg.lr_decay > 0) || cfg.lr_decay_every < 1) {
        throw ConfigError("invalid learning-rate schedule");
    }
    if (cfg.frac_ambient < 0 || cfg.frac_surface < 0 || cfg.frac_detail < 0 ||
        std::abs(cfg.frac_ambient + cfg.frac_surface + cfg.frac_detail - 1) > 1e-9) {
        throw ConfigError("batch fractions must be non-negative and sum to 1");
    }
}

SphereSet initial_spheres(const TriangleMesh& mesh, const SdfSampleSet& samples, int count,
                          std::uint64_t seed) {
    std::vector<std::size_t> inside;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples.samples[k].distance < 0) inside.push_back(k);
    }
    if (inside.empty()) throw ConfigError("sample set has no inside samples to seed spheres");
    const auto bs = bounding_sphere(mesh);
    SphereSet out(Points(count, 3), Vector::Constant(count, 0.5 * bs.radius / std::cbrt(count)));
    StreamRng rng(seed, 0xC0FFEE);
    for (int i = 0; i < count; ++i) {
        const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(inside.size()));
        out.centers.row(i) = samples.samples[inside[std::min(pick, inside.size() - 1)]].point.transpose();
    }
    return out;
}

FitResult fit_sphere_proxy(const TriangleMesh& mesh, const SdfSampleSet& samples, const FitConfig& cfg) {
    validate(cfg);
    if (samples.size() == 0) throw ConfigError("empty sample set");
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::size_t> pool[3];
    for (std::size_t k = 0; k < samples.size(); ++k) {
        pool[static_cast<int>(samples.samples[k].tag)].push_back(k);
    }
    auto quota = [&](Scalar frac) { return static_cast<std::size_t>(std::llround(frac * cfg.batch_size)); };
    std::size_t n_amb = pool[0].empty() ? 0 : quota(cfg.frac_ambient);
    std::size_t n_det = pool[2].empty() ? 0 : quota(cfg.frac_detail);
    n_amb = std::min<std::size_t>(n_amb, static_cast<std::size_t>(cfg.batch_size));
    n_det = std::min<std::size_t>(n_det, static_cast<std::size_t>(cfg.batch_size) - n_amb);
    std::size_t n_surf = static_cast<std::size_t>(cfg.batch_size) - n_amb - n_det;
    if (pool[1].empty()) {
        // No surface samples: fall back to drawing the remainder from everything.
        pool[1].resize(samples.size());
        std::iota(pool[1].begin(), pool[1].end(), 0);
    }
    const int steps = cfg.steps_per_epoch > 0
                          ? cfg.steps_per_epoch
                          : static_cast<int>((samples.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                             static_cast<std::size_t>(cfg.batch_size));

    SphereSet spheres = initial_spheres(mesh, samples, cfg.spheres, cfg.seed);
    const Eigen::Index s_count = spheres.size();
    Vector x(4 * s_count);
    for (Eigen::Index i = 0; i < s_count; ++i) {
        x.segment<3>(3 * i) = spheres.center(i);
        x[3 * s_count + i] = std::log(spheres.radii[i]);
    }
    Adam adam(x.size(), cfg.adam);
    Vector grad(x.size());
    std::vector<SdfSample> batch(static_cast<std::size_t>(cfg.batch_size));

    FitResult result;
    result.report.epochs.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Scalar lr = cfg.learning_rate * std::pow(cfg.lr_decay, epoch / cfg.lr_decay_every);
        EpochLoss rec;
        rec.epoch = epoch;
        for (int step = 0; step < steps; ++step) {
            StreamRng rng(cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(step) + 1);
            std::size_t b = 0;
            auto draw = [&](const std::vector<std::size_t>& from, std::size_t n) {
                for (std::size_t c = 0; c < n; ++c) {
                    const auto k = std::min(from.size() - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(from.size())));
                    batch[b++] = samples.samples[from[k]];
                }
            };
            draw(pool[0], n_amb);
            draw(pool[1], n_surf);
            draw(pool[2], n_det);

            for (Eigen::Index i = 0; i < s_count; ++i) {
                spheres.centers.row(i) = x.segment<3>(3 * i).transpose();
                spheres.radii[i] = std::exp(x[3 * s_count + i]);
            }
            const FitLosses loss = evaluate_fit_loss(spheres, batch, cfg.lambda_emptiness, cfg.lambda_is);
            if (!std::isfinite(loss.total) || !loss.grad.centers.allFinite() || !loss.grad.radii.allFinite()) {
                throw NonFiniteLoss("loss diverged at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(step));
            }
            rec.sdf += loss.sdf;
            rec.emptiness += loss.emptiness;
            rec.is += loss.is;
            for (Eigen::Index i = 0; i < s_count; ++i) {
                grad.segment<3>(3 * i) = loss.grad.centers.row(i).transpose();
                // Chain rule through r = exp(rho).
                grad[3 * s_count + i] = loss.grad.radii[i] * spheres.radii[i];
            }
            adam.step(x, grad, lr);
        }
        rec.sdf /= steps;
        rec.emptiness /= steps;
        rec.is /= steps;
        rec.total = rec.sdf + cfg.lambda_emptiness * rec.emptiness + cfg.lambda_is * rec.is;
        result.report.epochs.push_back(rec);
    }
    for (Eigen::Index i = 0; i < s_count; ++i) {
        spheres.centers.row(i) = x.segment<3>(3 * i).transpose();
        spheres.radii[i] = std::exp(x[3 * s_count + i]);
    }
    if (!spheres.centers.allFinite() || !spheres.radii.allFinite()) throw NonFiniteLoss("fitted spheres are not finite");

    const auto quality = proxy_quality_metrics(spheres, mesh, VoxelGridSpec{cfg.quality_voxel > 0 ? cfg.quality_voxel : 0.02, 3, cfg.seed},
                                               cfg.quality_voxel > 0);
    result.report.surface = quality.surface;
    result.report.surface_per_vertex = quality.surface / static_cast<Scalar>(std::max<Eigen::Index>(1, mesh.num_vertices()));
    result.report.vol_dev = quality.vol_dev;
    result.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.spheres = std::move(spheres);
    return result;
}

}  // namespace spx

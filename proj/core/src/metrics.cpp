#include "vcx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace vcx {

namespace {

constexpr double kC1 = 0.01 * 0.01; // (0.01 * L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;
constexpr double kNormEps = 1e-10;
constexpr double kEigClamp = 1e-6;

} // namespace

double r_squared(const PredictionPairSet& pairs) {
    if (pairs.targets.size() != pairs.predictions.size())
        throw ShapeError("r_squared: target/prediction size mismatch");
    const std::size_t n = pairs.size();
    if (n < 2) throw MetricError("r_squared: needs at least 2 pairs");
    double mean = 0.0;
    for (double y : pairs.targets) mean += y;
    mean /= static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = pairs.targets[i] - pairs.predictions[i];
        ss_res += r * r;
        const double m = pairs.targets[i] - mean;
        ss_tot += m * m;
    }
    if (ss_tot == 0.0) throw MetricError("r_squared: zero target variance");
    return 1.0 - ss_res / ss_tot;
}

double mae(const PredictionPairSet& pairs) {
    if (pairs.targets.size() != pairs.predictions.size())
        throw ShapeError("mae: target/prediction size mismatch");
    if (pairs.size() == 0) throw MetricError("mae: empty pair set");
    double acc = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        acc += std::fabs(pairs.targets[i] - pairs.predictions[i]);
    return acc / static_cast<double>(pairs.size());
}

double rmse(const PredictionPairSet& pairs) {
    if (pairs.targets.size() != pairs.predictions.size())
        throw ShapeError("rmse: target/prediction size mismatch");
    if (pairs.size() == 0) throw MetricError("rmse: empty pair set");
    double acc = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double d = pairs.targets[i] - pairs.predictions[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pairs.size()));
}

double flip_ratio(const std::vector<int>& predictions, const std::vector<int>& targets) {
    if (predictions.size() != targets.size()) throw ShapeError("flip_ratio: length mismatch");
    if (predictions.empty()) throw MetricError("flip_ratio: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == targets[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double ssim_global(const VideoTensor& x, const VideoTensor& y) {
    if (!x.same_shape(y)) throw ShapeError("ssim_global: shape mismatch");
    const std::size_t frame_px = x.height * x.width * x.channels;
    const double inv = 1.0 / static_cast<double>(frame_px);
    double acc = 0.0;
    for (std::size_t f = 0; f < x.frames; ++f) {
        const float* a = x.values.data() + f * frame_px;
        const float* b = y.values.data() + f * frame_px;
        double mu_a = 0.0, mu_b = 0.0;
        for (std::size_t i = 0; i < frame_px; ++i) {
            mu_a += a[i];
            mu_b += b[i];
        }
        mu_a *= inv;
        mu_b *= inv;
        double var_a = 0.0, var_b = 0.0, cov = 0.0;
        for (std::size_t i = 0; i < frame_px; ++i) {
            const double da = a[i] - mu_a;
            const double db = b[i] - mu_b;
            var_a += da * da;
            var_b += db * db;
            cov += da * db;
        }
        var_a *= inv;
        var_b *= inv;
        cov *= inv;
        const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
        const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
        acc += num / den;
    }
    return acc / static_cast<double>(x.frames);
}

double ssim_windowed(const VideoTensor& x, const VideoTensor& y) {
    if (!x.same_shape(y)) throw ShapeError("ssim_windowed: shape mismatch");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    double kernel[kWin];
    double ksum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - kWin / 2;
        kernel[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        ksum += kernel[i];
    }
    for (double& k : kernel) k /= ksum;

    const int h = static_cast<int>(x.height);
    const int w = static_cast<int>(x.width);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < x.frames; ++f) {
        for (std::size_t c = 0; c < x.channels; ++c) {
            for (int cy = 0; cy + kWin <= h; ++cy) {
                for (int cx = 0; cx + kWin <= w; ++cx) {
                    double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
                    for (int ky = 0; ky < kWin; ++ky) {
                        for (int kx = 0; kx < kWin; ++kx) {
                            const double wgt = kernel[ky] * kernel[kx];
                            const double av = x.at(f, cy + ky, cx + kx, c);
                            const double bv = y.at(f, cy + ky, cx + kx, c);
                            mu_a += wgt * av;
                            mu_b += wgt * bv;
                            aa += wgt * av * av;
                            bb += wgt * bv * bv;
                            ab += wgt * av * bv;
                        }
                    }
                    const double var_a = aa - mu_a * mu_a;
                    const double var_b = bb - mu_b * mu_b;
                    const double cov = ab - mu_a * mu_b;
                    const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
                    const double den =
                        (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
                    acc += num / den;
                    ++count;
                }
            }
        }
    }
    if (count == 0) throw ShapeError("ssim_windowed: frames smaller than the window");
    return acc / static_cast<double>(count);
}

const std::vector<std::string>& perceptual_layers() {
    static const std::vector<std::string> layers{"conv1", "conv2"};
    return layers;
}

double perceptual_distance(const VideoTensor& x, const VideoTensor& y, const TargetModel& target,
                           const std::vector<std::string>& layers) {
    if (!x.same_shape(y)) throw ShapeError("perceptual_distance: shape mismatch");
    double total = 0.0;
    for (const std::string& layer : layers) {
        const LatentTensor fx = target.features(x, layer);
        const LatentTensor fy = target.features(y, layer);
        const std::size_t positions = fx.height * fx.width;
        const std::size_t ch = fx.channels;
        for (std::size_t f = 0; f < fx.frames; ++f) {
            double frame_acc = 0.0;
            for (std::size_t p = 0; p < positions; ++p) {
                const float* va = fx.values.data() + (f * positions + p) * ch;
                const float* vb = fy.values.data() + (f * positions + p) * ch;
                double na = 0.0, nb = 0.0;
                for (std::size_t c = 0; c < ch; ++c) {
                    na += static_cast<double>(va[c]) * va[c];
                    nb += static_cast<double>(vb[c]) * vb[c];
                }
                na = std::sqrt(na) + kNormEps;
                nb = std::sqrt(nb) + kNormEps;
                for (std::size_t c = 0; c < ch; ++c) {
                    const double d = va[c] / na - vb[c] / nb;
                    frame_acc += d * d;
                }
            }
            total += frame_acc / static_cast<double>(positions);
        }
    }
    // layers share the frame count; average over frames once
    const LatentTensor probe = target.features(x, layers.front());
    return total / static_cast<double>(probe.frames);
}

FeatureStats feature_stats(const std::vector<const VideoTensor*>& videos,
                           const TargetModel& target, FeatureMode mode) {
    const std::string layer = mode == FeatureMode::PerFrame ? "frame_pool" : "video_embed";
    std::vector<std::vector<double>> vectors;
    for (const VideoTensor* v : videos) {
        const LatentTensor feats = target.features(*v, layer);
        const std::size_t ch = feats.channels;
        for (std::size_t f = 0; f < feats.frames; ++f) {
            std::vector<double> vec(ch);
            for (std::size_t c = 0; c < ch; ++c)
                vec[c] = feats.values[f * feats.height * feats.width * ch + c];
            vectors.push_back(std::move(vec));
        }
    }
    if (vectors.size() < 2) throw MetricError("feature_stats: needs at least 2 feature vectors");

    FeatureStats stats;
    stats.dim = vectors.front().size();
    stats.count = vectors.size();
    stats.dim_exceeds_count = stats.dim > stats.count;
    stats.mean.assign(stats.dim, 0.0);
    for (const auto& vec : vectors)
        for (std::size_t c = 0; c < stats.dim; ++c) stats.mean[c] += vec[c];
    for (double& m : stats.mean) m /= static_cast<double>(stats.count);
    stats.cov.assign(stats.dim * stats.dim, 0.0);
    for (const auto& vec : vectors) {
        for (std::size_t i = 0; i < stats.dim; ++i) {
            const double di = vec[i] - stats.mean[i];
            for (std::size_t j = 0; j < stats.dim; ++j)
                stats.cov[i * stats.dim + j] += di * (vec[j] - stats.mean[j]);
        }
    }
    const double inv = 1.0 / static_cast<double>(stats.count - 1);
    for (double& c : stats.cov) c *= inv;
    return stats;
}

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    if (a.dim != b.dim) throw ShapeError("frechet_distance: dimension mismatch");
    const auto d = static_cast<Eigen::Index>(a.dim);
    Eigen::Map<const Eigen::MatrixXd> sa(a.cov.data(), d, d);
    Eigen::Map<const Eigen::MatrixXd> sb(b.cov.data(), d, d);

    double mean_term = 0.0;
    for (std::size_t i = 0; i < a.dim; ++i) {
        const double diff = a.mean[i] - b.mean[i];
        mean_term += diff * diff;
    }

    // sqrt of S_a via symmetric eigendecomposition
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(0.5 * (sa + sa.transpose()));
    if (eig_a.info() != Eigen::Success)
        throw NumericError("frechet_distance: eigendecomposition failed");
    Eigen::VectorXd ev_a = eig_a.eigenvalues();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (ev_a[i] < -kEigClamp)
            throw NumericError("frechet_distance: covariance not positive semidefinite");
        ev_a[i] = std::sqrt(std::max(0.0, ev_a[i]));
    }
    const Eigen::MatrixXd root_a =
        eig_a.eigenvectors() * ev_a.asDiagonal() * eig_a.eigenvectors().transpose();

    // symmetrized product sqrt(S_a) S_b sqrt(S_a) shares eigenvalues with S_a S_b
    Eigen::MatrixXd prod = root_a * sb * root_a;
    prod = 0.5 * (prod + prod.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_p(prod);
    if (eig_p.info() != Eigen::Success)
        throw NumericError("frechet_distance: eigendecomposition failed");
    double trace_sqrt = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double ev = eig_p.eigenvalues()[i];
        if (ev < -kEigClamp)
            throw NumericError("frechet_distance: strongly indefinite covariance product");
        trace_sqrt += std::sqrt(std::max(0.0, ev));
    }

    const double result = mean_term + sa.trace() + sb.trace() - 2.0 * trace_sqrt;
    return std::max(0.0, result);
}

double l1_distance(const VideoTensor& a, const VideoTensor& b) {
    if (!a.same_shape(b)) throw ShapeError("l1_distance: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        acc += std::fabs(static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]));
    return acc;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("spearman: length mismatch");
    if (a.size() < 2) throw MetricError("spearman: needs at least 2 points");
    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return num / std::sqrt(va * vb);
}

namespace {

VariantMetrics compute_variant(const std::vector<const CounterfactualResult*>& results,
                               const TargetModel& target, Task task, bool masked,
                               bool* dim_advisory) {
    VariantMetrics m;
    m.present = true;
    std::vector<const VideoTensor*> factuals, candidates;
    std::vector<int> pred_classes, target_classes;
    PredictionPairSet pairs;
    double ssim_acc = 0.0, lp_acc = 0.0, l1_acc = 0.0;
    for (const CounterfactualResult* r : results) {
        const VideoTensor& candidate = masked ? *r->x_mask_cf : r->x_cf;
        factuals.push_back(&r->x_f);
        candidates.push_back(&candidate);
        const std::vector<float> pred = target.predict(candidate);
        if (task == Task::Classification) {
            pred_classes.push_back(argmax(pred));
            target_classes.push_back(r->y_prime.class_id);
        } else {
            pairs.targets.push_back(r->y_prime.value);
            pairs.predictions.push_back(pred[0]);
        }
        ssim_acc += ssim_global(r->x_f, candidate);
        lp_acc += perceptual_distance(r->x_f, candidate, target, perceptual_layers());
        l1_acc += l1_distance(r->x_f, candidate);
    }
    const double inv = 1.0 / static_cast<double>(results.size());
    m.ssim = ssim_acc * inv;
    m.perceptual = lp_acc * inv;
    m.l1 = l1_acc * inv;
    if (task == Task::Classification) {
        m.fr = flip_ratio(pred_classes, target_classes);
        const FeatureStats fact_frame = feature_stats(factuals, target, FeatureMode::PerFrame);
        const FeatureStats cand_frame = feature_stats(candidates, target, FeatureMode::PerFrame);
        m.fid = frechet_distance(fact_frame, cand_frame);
        const FeatureStats fact_vid = feature_stats(factuals, target, FeatureMode::TemporalPooled);
        const FeatureStats cand_vid = feature_stats(candidates, target, FeatureMode::TemporalPooled);
        m.fvd = frechet_distance(fact_vid, cand_vid);
        if (dim_advisory)
            *dim_advisory = *dim_advisory || fact_frame.dim_exceeds_count ||
                            fact_vid.dim_exceeds_count;
    } else {
        m.r2 = r_squared(pairs);
        m.mae_v = mae(pairs);
        m.rmse_v = rmse(pairs);
    }
    return m;
}

} // namespace

MetricsReport evaluate_run_set(const std::vector<const CounterfactualResult*>& results,
                               const TargetModel& target, Task task) {
    if (results.empty()) throw ConfigError("evaluate_run_set: empty result collection");
    for (const CounterfactualResult* r : results) {
        if (r->config.task != task)
            throw ConfigError("evaluate_run_set: mixed tasks in the result collection");
        if (!r->x_f.same_shape(results.front()->x_f))
            throw ConfigError("evaluate_run_set: results disagree on video shape");
    }

    MetricsReport report;
    report.task = task;
    report.runs = results.size();
    report.cf = compute_variant(results, target, task, false, &report.feature_dim_advisory);
    for (const CounterfactualResult* r : results) {
        report.per_run_ssim.push_back(ssim_global(r->x_f, r->x_cf));
        report.per_run_perceptual.push_back(
            perceptual_distance(r->x_f, r->x_cf, target, perceptual_layers()));
    }

    bool all_masked = true;
    double density_acc = 0.0;
    for (const CounterfactualResult* r : results) {
        if (!r->x_mask_cf.has_value()) {
            all_masked = false;
            break;
        }
        density_acc += r->mask_density;
    }
    if (all_masked) {
        report.masked = compute_variant(results, target, task, true, &report.feature_dim_advisory);
        report.mask_density = density_acc / static_cast<double>(results.size());
    }
    return report;
}

} // namespace vcx

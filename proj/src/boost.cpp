// Copyright 2026 The pemsurv Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pemsurv/boost.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>

#include "pemsurv/error.hpp"
#include "pemsurv/poisson.hpp"
#include "pemsurv/random.hpp"

namespace pemsurv {

void BoostParams::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw DomainError(std::string("invalid boosting parameter: ") + what);
    };
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be > 0");
    require(n_rounds >= 1, "n_rounds must be >= 1");
    require(!early_stopping_rounds || *early_stopping_rounds >= 1, "early_stopping_rounds must be >= 1");
    require(max_depth >= 1, "max_depth must be >= 1");
    require(min_loss_reduction >= 0.0, "min_loss_reduction must be >= 0");
    require(min_child_weight >= 0.0, "min_child_weight must be >= 0");
    require(row_subsample > 0.0 && row_subsample <= 1.0, "row_subsample must be in (0, 1]");
    require(col_subsample > 0.0 && col_subsample <= 1.0, "col_subsample must be in (0, 1]");
    require(l2_lambda >= 0.0, "l2_lambda must be >= 0");
    require(std::isfinite(base_margin_init), "base_margin_init must be finite");
    require(max_bins == 0 || max_bins >= 2, "max_bins must be 0 or >= 2");
    for (const auto& c : split_constraints) require(c.depth >= 0, "split constraint depth must be >= 0");
}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw DomainError("tree needs at least one node");
    for (const auto& n : nodes_) {
        if (n.is_leaf()) {
            if (!std::isfinite(n.weight)) throw DomainError("non-finite leaf weight");
        } else if (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(n.left) >= nodes_.size() ||
                   static_cast<std::size_t>(n.right) >= nodes_.size()) {
            throw DomainError("internal node with invalid children");
        }
    }
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes_.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes_[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

namespace {

constexpr double kHessianFloor = 1e-16;

struct FeatureBins {
    bool categorical = false;
    /// Largest training value in each bin.
    std::vector<double> upper;
    /// Smallest training value in each bin.
    std::vector<double> lower;

    std::uint32_t bin_of(double x) const {
        if (categorical) return static_cast<std::uint32_t>(x);
        auto it = std::lower_bound(upper.begin(), upper.end(), x);
        if (it == upper.end()) --it;
        return static_cast<std::uint32_t>(it - upper.begin());
    }
};

FeatureBins make_bins(const Eigen::Ref<const Eigen::VectorXd>& column, const FeatureSpec& spec, int max_bins) {
    FeatureBins fb;
    if (spec.is_categorical()) {
        fb.categorical = true;
        for (std::size_t c = 0; c < std::max<std::size_t>(spec.levels.size(), 1); ++c) {
            fb.upper.push_back(static_cast<double>(c));
            fb.lower.push_back(static_cast<double>(c));
        }
        return fb;
    }
    std::vector<double> v(column.data(), column.data() + column.size());
    std::sort(v.begin(), v.end());
    if (v.empty()) {
        fb.upper = {0.0};
        fb.lower = {0.0};
        return fb;
    }
    std::vector<double> uniq;
    std::vector<std::size_t> counts;
    for (double x : v) {
        if (uniq.empty() || x != uniq.back()) {
            uniq.push_back(x);
            counts.push_back(0);
        }
        ++counts.back();
    }
    if (max_bins == 0 || uniq.size() <= static_cast<std::size_t>(max_bins)) {
        fb.upper = uniq;
        fb.lower = uniq;
        return fb;
    }
    // Quantile bins: close a bin once the running count passes the next boundary.
    const double per_bin = static_cast<double>(v.size()) / max_bins;
    std::size_t cum = 0;
    double next_boundary = per_bin;
    fb.lower.push_back(uniq.front());
    for (std::size_t u = 0; u < uniq.size(); ++u) {
        cum += counts[u];
        const bool last = u + 1 == uniq.size();
        if (last || static_cast<double>(cum) >= next_boundary) {
            fb.upper.push_back(uniq[u]);
            if (!last) fb.lower.push_back(uniq[u + 1]);
            while (next_boundary <= static_cast<double>(cum)) next_boundary += per_bin;
        }
    }
    return fb;
}

struct HistBin {
    double g = 0.0;
    double h = 0.0;
    std::int64_t n = 0;
};

struct Totals {
    double g = 0.0;
    double h = 0.0;
    std::int64_t n = 0;
};

/// Row-major bin codes of the training rows.
struct BinnedData {
    std::size_t n_rows = 0;
    std::size_t n_features = 0;
    std::vector<FeatureBins> features;
    std::vector<std::size_t> offset;
    std::size_t total_bins = 0;
    std::vector<std::uint32_t> codes;

    const std::uint32_t* row(std::size_t r) const { return codes.data() + r * n_features; }
};

BinnedData bin_features(const PedDataset& ped, int max_bins) {
    BinnedData b;
    b.n_rows = static_cast<std::size_t>(ped.size());
    b.n_features = ped.n_features();
    for (std::size_t f = 0; f < b.n_features; ++f) {
        b.features.push_back(make_bins(ped.features.col(static_cast<Eigen::Index>(f)), ped.schema[f], max_bins));
        b.offset.push_back(b.total_bins);
        b.total_bins += b.features.back().upper.size();
    }
    b.codes.resize(b.n_rows * b.n_features);
    for (std::size_t f = 0; f < b.n_features; ++f) {
        const auto& fb = b.features[f];
        for (std::size_t r = 0; r < b.n_rows; ++r)
            b.codes[r * b.n_features + f] =
                fb.bin_of(ped.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)));
    }
    return b;
}

double leaf_weight(double g, double h, double lambda) { return -g / (std::max(h, kHessianFloor) + lambda); }

double score(double g, double h, double lambda) { return g * g / (std::max(h, kHessianFloor) + lambda); }

struct SplitChoice {
    int feature = -1;
    std::uint32_t bin = 0;
    bool categorical = false;
    double gain = 0.0;
    Totals left;
};

struct OpenNode {
    int node;
    std::size_t begin;
    std::size_t end;
    int depth;
    Totals totals;
    std::vector<HistBin> hist;
};

class TreeBuilder {
public:
    TreeBuilder(const BinnedData& data, const BoostParams& params, std::span<const double> grad,
                std::span<const double> hess, std::vector<int> active, std::vector<int> ban_depth,
                std::vector<std::pair<int, int>> forced)
        : data_(data),
          params_(params),
          grad_(grad),
          hess_(hess),
          active_(std::move(active)),
          ban_depth_(std::move(ban_depth)),
          forced_(std::move(forced)) {}

    /// Grows one tree on `rows` (reordered in place). Fills the bin index of
    /// each split for fast routing of training rows.
    std::vector<TreeNode> grow(std::vector<std::uint32_t>& rows, std::vector<std::uint32_t>& split_bins) {
        rows_ = &rows;
        std::vector<TreeNode> nodes(1);
        split_bins.assign(1, 0);
        OpenNode root{0, 0, rows.size(), 0, {}, build(0, rows.size())};
        for (std::size_t i = 0; i < rows.size(); ++i) {
            root.totals.g += grad_[rows[i]];
            root.totals.h += hess_[rows[i]];
        }
        root.totals.n = static_cast<std::int64_t>(rows.size());

        std::vector<OpenNode> level;
        level.push_back(std::move(root));
        while (!level.empty()) {
            std::vector<OpenNode> next;
            for (auto& open : level) {
                auto& node = nodes[static_cast<std::size_t>(open.node)];
                node.cover = open.totals.h;
                SplitChoice split;
                if (open.depth < params_.max_depth) split = find_split(open);
                if (split.feature < 0) {
                    node.weight = leaf_weight(open.totals.g, open.totals.h, params_.l2_lambda);
                    continue;
                }
                const auto& fb = data_.features[static_cast<std::size_t>(split.feature)];
                node.feature = split.feature;
                node.categorical = split.categorical;
                node.gain = split.gain;
                if (split.categorical) {
                    node.threshold = fb.upper[split.bin];
                } else {
                    const double a = fb.upper[split.bin];
                    const double b = fb.lower[split.bin + 1];
                    const double mid = a + (b - a) / 2.0;
                    node.threshold = (mid >= a && mid < b) ? mid : a;
                }
                split_bins[static_cast<std::size_t>(open.node)] = split.bin;

                const std::size_t f = static_cast<std::size_t>(split.feature);
                auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(open.begin),
                                             rows.begin() + static_cast<std::ptrdiff_t>(open.end),
                                             [&](std::uint32_t r) {
                                                 const auto code = data_.row(r)[f];
                                                 return split.categorical ? code == split.bin : code <= split.bin;
                                             });
                const std::size_t mid = static_cast<std::size_t>(mid_it - rows.begin());

                const int left_id = static_cast<int>(nodes.size());
                nodes.emplace_back();
                nodes.emplace_back();
                split_bins.push_back(0);
                split_bins.push_back(0);
                nodes[static_cast<std::size_t>(open.node)].left = left_id;
                nodes[static_cast<std::size_t>(open.node)].right = left_id + 1;

                Totals right{open.totals.g - split.left.g, open.totals.h - split.left.h,
                             open.totals.n - split.left.n};
                OpenNode l{left_id, open.begin, mid, open.depth + 1, split.left, {}};
                OpenNode r{left_id + 1, mid, open.end, open.depth + 1, right, {}};
                if (open.depth + 1 < params_.max_depth) {
                    // Build the smaller child, derive the other by subtraction.
                    OpenNode& small = (mid - open.begin) <= (open.end - mid) ? l : r;
                    OpenNode& large = (&small == &l) ? r : l;
                    small.hist = build(small.begin, small.end);
                    large.hist = std::move(open.hist);
                    for (std::size_t i = 0; i < large.hist.size(); ++i) {
                        large.hist[i].g -= small.hist[i].g;
                        large.hist[i].h -= small.hist[i].h;
                        large.hist[i].n -= small.hist[i].n;
                    }
                }
                next.push_back(std::move(l));
                next.push_back(std::move(r));
            }
            level = std::move(next);
        }
        return nodes;
    }

private:
    std::vector<HistBin> build(std::size_t begin, std::size_t end) const {
        std::vector<HistBin> hist(data_.total_bins);
        const auto& rows = *rows_;
        for (std::size_t i = begin; i < end; ++i) {
            const std::uint32_t r = rows[i];
            const std::uint32_t* codes = data_.row(r);
            const double g = grad_[r];
            const double h = hess_[r];
            for (int f : active_) {
                auto& e = hist[data_.offset[static_cast<std::size_t>(f)] + codes[f]];
                e.g += g;
                e.h += h;
                ++e.n;
            }
        }
        return hist;
    }

    void scan_feature(const OpenNode& open, int f, bool forced, SplitChoice& best) const {
        const auto& fb = data_.features[static_cast<std::size_t>(f)];
        const HistBin* hist = open.hist.data() + data_.offset[static_cast<std::size_t>(f)];
        const std::size_t nb = fb.upper.size();
        const double lambda = params_.l2_lambda;
        const Totals& t = open.totals;
        const double parent = score(t.g, t.h, lambda);
        auto consider = [&](std::uint32_t bin, const Totals& left) {
            const Totals right{t.g - left.g, t.h - left.h, t.n - left.n};
            if (left.n == 0 || right.n == 0) return;
            if (!forced && (left.h < params_.min_child_weight || right.h < params_.min_child_weight)) return;
            const double gain =
                0.5 * (score(left.g, left.h, lambda) + score(right.g, right.h, lambda) - parent) -
                params_.min_loss_reduction;
            if (!forced && !(gain > 0.0)) return;
            if (best.feature < 0 || gain > best.gain) {
                best.feature = f;
                best.bin = bin;
                best.categorical = fb.categorical;
                best.gain = gain;
                best.left = left;
            }
        };
        if (fb.categorical) {
            for (std::size_t b = 0; b < nb; ++b) consider(static_cast<std::uint32_t>(b), {hist[b].g, hist[b].h, hist[b].n});
        } else {
            Totals left;
            for (std::size_t b = 0; b + 1 < nb; ++b) {
                left.g += hist[b].g;
                left.h += hist[b].h;
                left.n += hist[b].n;
                if (hist[b].n == 0) continue;
                consider(static_cast<std::uint32_t>(b), left);
            }
        }
    }

    SplitChoice find_split(const OpenNode& open) const {
        SplitChoice best;
        for (const auto& [f, depth] : forced_) {
            if (open.depth > depth) continue;
            scan_feature(open, f, true, best);
            if (best.feature >= 0) return best;
        }
        for (int f : active_) {
            if (open.depth >= ban_depth_[static_cast<std::size_t>(f)]) continue;
            scan_feature(open, f, false, best);
        }
        return best;
    }

    const BinnedData& data_;
    const BoostParams& params_;
    std::span<const double> grad_;
    std::span<const double> hess_;
    std::vector<int> active_;
    std::vector<int> ban_depth_;
    std::vector<std::pair<int, int>> forced_;
    std::vector<std::uint32_t>* rows_ = nullptr;
};

int route_binned(const std::vector<TreeNode>& nodes, const std::vector<std::uint32_t>& split_bins,
                 const std::uint32_t* codes) {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        const auto code = codes[n.feature];
        const auto bin = split_bins[static_cast<std::size_t>(i)];
        const bool left = n.categorical ? code == bin : code <= bin;
        i = left ? n.left : n.right;
    }
    return i;
}

void check_schema_match(const FeatureSchema& a, const FeatureSchema& b) {
    if (a.size() != b.size()) throw SchemaError("feature schema mismatch: different number of features");
    for (std::size_t f = 0; f < a.size(); ++f) {
        if (a[f].name != b[f].name || a[f].kind != b[f].kind || a[f].levels != b[f].levels)
            throw SchemaError("feature schema mismatch at feature '" + a[f].name + "'");
    }
}

void check_categorical_codes(const FeatureSchema& schema, const Eigen::MatrixXd& rows) {
    for (std::size_t f = 0; f < schema.size(); ++f) {
        if (!schema[f].is_categorical()) continue;
        const double n_levels = static_cast<double>(schema[f].levels.size());
        for (Eigen::Index r = 0; r < rows.rows(); ++r) {
            const double v = rows(r, static_cast<Eigen::Index>(f));
            if (!(v >= 0.0 && v < n_levels && v == std::floor(v)))
                throw SchemaError("unknown categorical code for feature '" + schema[f].name + "'");
        }
    }
}

}  // namespace

BoostedEnsemble fit(const PedDataset& ped, const BoostParams& params, const PedDataset* valid) {
    params.validate();
    if (ped.size() == 0) throw DomainError("cannot fit on an empty PED");
    if (valid) check_schema_match(ped.schema, valid->schema);
    if (params.early_stopping_rounds && !valid) throw DomainError("early stopping requires a validation set");
    check_categorical_codes(ped.schema, ped.features);

    const std::size_t F = ped.n_features();
    std::vector<int> ban_depth(F, std::numeric_limits<int>::max());
    std::vector<std::pair<int, int>> forced;
    for (const auto& c : params.split_constraints) {
        const auto idx = ped.schema.index_of(c.feature);
        if (!idx) throw SchemaError("split constraint on unknown feature '" + c.feature + "'");
        if (c.kind == SplitConstraint::Kind::ban)
            ban_depth[*idx] = std::min(ban_depth[*idx], c.depth);
        else
            forced.emplace_back(static_cast<int>(*idx), c.depth);
    }

    const BinnedData data = bin_features(ped, params.max_bins);
    const auto n = static_cast<std::size_t>(ped.size());
    const Eigen::ArrayXd log_off = ped.toff.array().log();
    const Eigen::ArrayXd y = ped.label.array();
    Eigen::ArrayXd margin = Eigen::ArrayXd::Constant(static_cast<Eigen::Index>(n), params.base_margin_init);
    Eigen::ArrayXd grad(static_cast<Eigen::Index>(n));
    Eigen::ArrayXd hess(static_cast<Eigen::Index>(n));

    Eigen::ArrayXd valid_log_off, valid_y, valid_margin;
    if (valid) {
        valid_log_off = valid->toff.array().log();
        valid_y = valid->label.array();
        valid_margin = Eigen::ArrayXd::Constant(valid->size(), params.base_margin_init);
        check_categorical_codes(valid->schema, valid->features);
    }

    BoostedEnsemble model;
    model.params = params;
    model.schema = ped.schema;
    model.cutpoints = ped.cutpoints;
    model.n_causes = ped.n_causes;

    Rng rng(params.seed);
    std::vector<std::uint32_t> rows;
    rows.reserve(n);
    std::vector<std::uint32_t> split_bins;
    double best_valid = std::numeric_limits<double>::infinity();
    int best_round = -1;

    for (int round = 0; round < params.n_rounds; ++round) {
        poisson_gradient_hessian(margin, log_off, y, grad, hess);

        rows.clear();
        if (params.row_subsample < 1.0) {
            for (std::size_t r = 0; r < n; ++r)
                if (rng.uniform() < params.row_subsample) rows.push_back(static_cast<std::uint32_t>(r));
        }
        if (rows.empty()) {
            rows.resize(n);
            std::iota(rows.begin(), rows.end(), 0u);
        }

        std::vector<int> active;
        if (params.col_subsample < 1.0) {
            std::vector<int> all(F);
            std::iota(all.begin(), all.end(), 0);
            rng.shuffle(all);
            const auto keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(params.col_subsample * static_cast<double>(F))));
            active.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(keep, F)));
            for (const auto& [f, d] : forced)
                if (std::find(active.begin(), active.end(), f) == active.end()) active.push_back(f);
            std::sort(active.begin(), active.end());
        } else {
            active.resize(F);
            std::iota(active.begin(), active.end(), 0);
        }

        TreeBuilder builder(data, params, std::span<const double>(grad.data(), n),
                            std::span<const double>(hess.data(), n), active, ban_depth, forced);
        auto nodes = builder.grow(rows, split_bins);

        for (std::size_t r = 0; r < n; ++r) {
            const int leaf = route_binned(nodes, split_bins, data.row(r));
            margin(static_cast<Eigen::Index>(r)) += params.learning_rate * nodes[static_cast<std::size_t>(leaf)].weight;
        }
        model.trees.emplace_back(std::move(nodes));
        model.train_deviance.push_back(poisson_mean_deviance(margin, log_off, y));

        if (valid) {
            const auto& tree = model.trees.back();
            for (Eigen::Index r = 0; r < valid->size(); ++r)
                valid_margin(r) += params.learning_rate * tree.leaf_value(valid->features.row(r));
            const double dev = poisson_mean_deviance(valid_margin, valid_log_off, valid_y);
            model.valid_deviance.push_back(dev);
            if (dev < best_valid) {
                best_valid = dev;
                best_round = round;
            }
            if (params.early_stopping_rounds && round - best_round >= *params.early_stopping_rounds) break;
        }
    }

    if (params.early_stopping_rounds && best_round >= 0) {
        model.trees.resize(static_cast<std::size_t>(best_round) + 1);
        model.best_iteration = best_round;
    }
    return model;
}

Eigen::VectorXd predict_margin(const BoostedEnsemble& model, const Eigen::MatrixXd& rows) {
    if (static_cast<std::size_t>(rows.cols()) != model.schema.size())
        throw SchemaError("prediction rows have " + std::to_string(rows.cols()) + " features, model expects " +
                          std::to_string(model.schema.size()));
    check_categorical_codes(model.schema, rows);
    Eigen::VectorXd out = Eigen::VectorXd::Constant(rows.rows(), model.params.base_margin_init);
    for (const auto& tree : model.trees) {
        for (Eigen::Index r = 0; r < rows.rows(); ++r)
            out(r) += model.params.learning_rate * tree.leaf_value(rows.row(r));
    }
    return out;
}

std::vector<double> feature_gain_report(const BoostedEnsemble& model) {
    std::vector<double> gain(model.schema.size(), 0.0);
    for (const auto& tree : model.trees)
        for (const auto& node : tree.nodes())
            if (!node.is_leaf()) gain[static_cast<std::size_t>(node.feature)] += std::max(node.gain, 0.0);
    return gain;
}

}  // namespace pemsurv

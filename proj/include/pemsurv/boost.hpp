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

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pemsurv/ped.hpp"
#include "pemsurv/survdata.hpp"

namespace pemsurv {

/// Restricts splits on one feature. `ban` forbids splits at node depth >=
/// depth (0 bans the feature everywhere). `force` makes every node at depth
/// <= depth split on the feature whenever it takes two values in the node,
/// regardless of gain or child weight.
struct SplitConstraint {
    enum class Kind { ban, force };
    std::string feature;
    Kind kind = Kind::ban;
    int depth = 0;

    static SplitConstraint ban(std::string feature, int depth = 0) { return {std::move(feature), Kind::ban, depth}; }
    static SplitConstraint force(std::string feature, int depth = 0) {
        return {std::move(feature), Kind::force, depth};
    }
    friend bool operator==(const SplitConstraint&, const SplitConstraint&) = default;
};

struct BoostParams {
    double learning_rate = 0.05;
    int n_rounds = 100;
    std::optional<int> early_stopping_rounds;
    int max_depth = 6;
    /// gamma
    double min_loss_reduction = 0.0;
    /// Minimum hessian sum per child.
    double min_child_weight = 1.0;
    double row_subsample = 1.0;
    double col_subsample = 1.0;
    double l2_lambda = 1.0;
    /// Initial log-hazard.
    double base_margin_init = 0.0;
    std::vector<SplitConstraint> split_constraints;
    /// 0 enumerates every distinct value; otherwise features with more
    /// distinct values are quantile-binned to at most this many bins.
    int max_bins = 0;
    std::uint64_t seed = 0;

    /// Throws DomainError when a range is violated.
    void validate() const;
    friend bool operator==(const BoostParams&, const BoostParams&) = default;
};

struct TreeNode {
    /// -1 for leaves.
    int feature = -1;
    double threshold = 0.0;
    /// One-vs-rest split: rows with x == threshold go left.
    bool categorical = false;
    int left = -1;
    int right = -1;
    /// Leaf log-hazard increment before learning-rate scaling.
    double weight = 0.0;
    double gain = 0.0;
    /// Hessian sum of training rows reaching the node.
    double cover = 0.0;

    bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
public:
    RegressionTree() : nodes_(1) {}
    explicit RegressionTree(std::vector<TreeNode> nodes);

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    int depth() const;

    template <class Row>
    int leaf_index(const Row& x) const {
        int i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            const double v = x(n.feature);
            const bool go_left = n.categorical ? v == n.threshold : v <= n.threshold;
            i = go_left ? n.left : n.right;
        }
        return i;
    }

    template <class Row>
    double leaf_value(const Row& x) const {
        return nodes_[leaf_index(x)].weight;
    }

private:
    std::vector<TreeNode> nodes_;
};

/// Additive trees on the log-hazard scale.
struct BoostedEnsemble {
    std::vector<RegressionTree> trees;
    BoostParams params;
    FeatureSchema schema;
    CutPoints cutpoints;
    int n_causes = 1;
    /// Index of the last tree kept after early stopping; -1 when not used.
    int best_iteration = -1;
    std::vector<double> train_deviance;
    std::vector<double> valid_deviance;
};

/// Second-order boosting of the Poisson likelihood with offset log(toff).
BoostedEnsemble fit(const PedDataset& ped, const BoostParams& params, const PedDataset* valid = nullptr);

/// Log-hazard per row (no offset). Rows carry every schema feature,
/// including t_j and k.
Eigen::VectorXd predict_margin(const BoostedEnsemble& model, const Eigen::MatrixXd& rows);

/// Total split gain per schema feature.
std::vector<double> feature_gain_report(const BoostedEnsemble& model);

}  // namespace pemsurv

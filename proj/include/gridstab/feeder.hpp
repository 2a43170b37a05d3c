#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "gridstab/phase.hpp"

namespace gridstab {

using Matrix3c = Eigen::Matrix3cd;
using Matrix3d = Eigen::Matrix3d;

/// Series impedance block of a line in per-unit, R + jX.
///
/// Rows and columns of phases not on the line are zero, the block is
/// symmetric and present diagonal entries have non-negative R and X with a
/// non-zero modulus.
struct LineImpedance {
    Matrix3c z = Matrix3c::Zero();
    PhaseSet phases;

    LineImpedance() = default;
    LineImpedance(Matrix3c block, PhaseSet ph);

    Matrix3d r() const { return z.real(); }
    Matrix3d x() const { return z.imag(); }

    /// Throws PhaseError / ParseError when the invariants above do not hold.
    void validate() const;

    /// A scalar single-phase block (r + jx on one phase).
    static LineImpedance single_phase(double r, double x, Phase p = Phase::A);
    /// A diagonal, balanced three-phase block with no mutual terms.
    static LineImpedance balanced(double r, double x);
};

struct Node {
    std::string id;
    PhaseSet phases;
};

struct Line {
    std::string id;
    std::string from;
    std::string to;
    LineImpedance impedance;
};

/// Radial, possibly unbalanced, three-phase feeder.
///
/// Construction validates the tree: one line per non-substation node, every
/// node reachable from the substation, and each node's phases contained in
/// the phases of the line feeding it. Lines may be listed in either
/// direction; they are oriented away from the substation on construction.
/// Immutable afterwards.
class Feeder {
public:
    Feeder(std::vector<Node> nodes, std::vector<Line> lines, std::string substation,
           double base_kv = 1.0, double base_mva = 1.0, std::string name = {});

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Line>& lines() const { return lines_; }
    const std::string& substation() const { return substation_; }
    const std::string& name() const { return name_; }
    double base_kv() const { return base_kv_; }
    double base_mva() const { return base_mva_; }

    std::size_t node_count() const { return nodes_.size(); }
    bool has_node(const std::string& id) const { return index_.contains(id); }
    /// Index into nodes(); throws UnknownNode.
    std::size_t node_index(const std::string& id) const;
    const Node& node(const std::string& id) const { return nodes_[node_index(id)]; }

    /// Index of the line feeding node i (nullopt for the substation).
    std::optional<std::size_t> parent_line(std::size_t node) const { return parent_line_[node]; }
    std::size_t parent_node(std::size_t node) const { return parent_node_[node]; }
    std::size_t depth(std::size_t node) const { return depth_[node]; }

    /// Node indices ordered root first, parents before children.
    const std::vector<std::size_t>& topological_order() const { return order_; }

    /// Non-substation node ids, in the order used for state vectors.
    std::vector<std::string> state_nodes() const;

    /// Same feeder with replaced line impedances (same order and count as lines()).
    Feeder with_impedances(const std::vector<LineImpedance>& impedances) const;

private:
    std::vector<Node> nodes_;
    std::vector<Line> lines_;
    std::string substation_;
    double base_kv_;
    double base_mva_;
    std::string name_;

    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::optional<std::size_t>> parent_line_;
    std::vector<std::size_t> parent_node_;
    std::vector<std::size_t> depth_;
    std::vector<std::size_t> order_;
};

/// Parses the JSON feeder document. Throws ParseError, TopologyError or PhaseError.
Feeder feeder_from_json(const nlohmann::json& doc);
nlohmann::json feeder_to_json(const Feeder& f);
Feeder load_feeder(const std::filesystem::path& path);

/// Unique sequence of line indices from the node back to the substation
/// (first element is the line feeding the node). Empty for the substation.
std::vector<std::size_t> path_to_substation(const Feeder& f, const std::string& node_id);

/// Sum of the impedance blocks along the node's path to the substation.
Matrix3c path_impedance(const Feeder& f, const std::string& node_id);

}  // namespace gridstab

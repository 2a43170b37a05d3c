#include "gridstab/feeder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

#include "gridstab/error.hpp"

namespace gridstab {

PhaseSet PhaseSet::parse(std::string_view text) {
    std::bitset<3> bits;
    for (char ch : text) {
        const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        const auto it = std::find(kPhaseLetters.begin(), kPhaseLetters.end(), up);
        if (it == kPhaseLetters.end())
            throw ParseError("invalid phase letter '" + std::string(1, ch) + "' in \"" +
                             std::string(text) + "\"");
        const auto idx = static_cast<std::size_t>(it - kPhaseLetters.begin());
        if (bits.test(idx))
            throw ParseError("duplicate phase in \"" + std::string(text) + "\"");
        bits.set(idx);
    }
    if (bits.none()) throw ParseError("empty phase set");
    return PhaseSet(bits);
}

std::string PhaseSet::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < 3; ++i)
        if (bits_.test(i)) s.push_back(kPhaseLetters[i]);
    return s;
}

LineImpedance::LineImpedance(Matrix3c block, PhaseSet ph) : z(std::move(block)), phases(ph) {}

void LineImpedance::validate() const {
    if (phases.empty()) throw PhaseError("line impedance with no phases");
    if (!z.allFinite()) throw ParseError("non-finite impedance entry");
    const double scale = std::max(1.0, z.cwiseAbs().maxCoeff());
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (std::abs(z(i, j) - z(j, i)) > 1e-12 * scale)
                throw ParseError("impedance block is not symmetric");
            const bool present = phases.contains(std::size_t(i)) && phases.contains(std::size_t(j));
            if (!present && z(i, j) != std::complex<double>(0.0))
                throw PhaseError("non-zero impedance on an absent phase");
        }
        if (phases.contains(std::size_t(i))) {
            const auto zii = z(i, i);
            if (zii.real() < 0.0 || zii.imag() < 0.0)
                throw ParseError("negative self resistance or reactance");
            if (std::abs(zii) == 0.0)
                throw ParseError("zero self impedance on a present phase");
        }
    }
}

LineImpedance LineImpedance::single_phase(double r, double x, Phase p) {
    Matrix3c z = Matrix3c::Zero();
    const auto i = static_cast<Eigen::Index>(p);
    z(i, i) = {r, x};
    PhaseSet ph;
    ph.insert(p);
    return {z, ph};
}

LineImpedance LineImpedance::balanced(double r, double x) {
    Matrix3c z = Matrix3c::Zero();
    z.diagonal().setConstant({r, x});
    return {z, PhaseSet::all()};
}

Feeder::Feeder(std::vector<Node> nodes, std::vector<Line> lines, std::string substation,
               double base_kv, double base_mva, std::string name)
    : nodes_(std::move(nodes)),
      lines_(std::move(lines)),
      substation_(std::move(substation)),
      base_kv_(base_kv),
      base_mva_(base_mva),
      name_(std::move(name)) {
    if (nodes_.empty()) throw TopologyError("feeder has no nodes");
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].phases.empty()) throw PhaseError("node " + nodes_[i].id + " has no phases");
        if (!index_.emplace(nodes_[i].id, i).second)
            throw TopologyError("duplicate node id " + nodes_[i].id);
    }
    if (!index_.contains(substation_))
        throw TopologyError("substation " + substation_ + " is not a node");
    if (lines_.size() + 1 != nodes_.size())
        throw TopologyError("a radial feeder with " + std::to_string(nodes_.size()) +
                            " nodes needs " + std::to_string(nodes_.size() - 1) + " lines, got " +
                            std::to_string(lines_.size()));

    const std::size_t n = nodes_.size();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);  // (neighbour, line)
    for (std::size_t k = 0; k < lines_.size(); ++k) {
        const auto& ln = lines_[k];
        const auto a = index_.find(ln.from);
        const auto b = index_.find(ln.to);
        if (a == index_.end() || b == index_.end())
            throw TopologyError("line " + ln.id + " references an unknown node");
        if (a->second == b->second) throw TopologyError("line " + ln.id + " is a self loop");
        ln.impedance.validate();
        adj[a->second].emplace_back(b->second, k);
        adj[b->second].emplace_back(a->second, k);
    }

    parent_line_.assign(n, std::nullopt);
    parent_node_.assign(n, n);
    depth_.assign(n, 0);
    std::vector<bool> seen(n, false);
    const std::size_t root = index_.at(substation_);
    std::queue<std::size_t> frontier;
    frontier.push(root);
    seen[root] = true;
    while (!frontier.empty()) {
        const std::size_t u = frontier.front();
        frontier.pop();
        order_.push_back(u);
        for (const auto& [v, k] : adj[u]) {
            if (parent_line_[u] == k) continue;
            if (seen[v]) throw TopologyError("line " + lines_[k].id + " closes a loop");
            seen[v] = true;
            parent_line_[v] = k;
            parent_node_[v] = u;
            depth_[v] = depth_[u] + 1;
            if (lines_[k].to != nodes_[v].id) std::swap(lines_[k].from, lines_[k].to);
            frontier.push(v);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) throw TopologyError("node " + nodes_[i].id + " is not connected");

    for (std::size_t i = 0; i < n; ++i) {
        if (!parent_line_[i]) continue;
        const auto& ln = lines_[*parent_line_[i]];
        if (!nodes_[i].phases.subset_of(ln.impedance.phases))
            throw PhaseError("node " + nodes_[i].id + " has phases " + nodes_[i].phases.to_string() +
                             " not carried by line " + ln.id + " (" +
                             ln.impedance.phases.to_string() + ")");
        if (!ln.impedance.phases.subset_of(nodes_[parent_node_[i]].phases))
            throw PhaseError("line " + ln.id + " carries phases missing at " +
                             nodes_[parent_node_[i]].id);
    }
}

std::size_t Feeder::node_index(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw UnknownNode("unknown node " + id);
    return it->second;
}

std::vector<std::string> Feeder::state_nodes() const {
    std::vector<std::string> ids;
    ids.reserve(nodes_.size() - 1);
    for (const auto& nd : nodes_)
        if (nd.id != substation_) ids.push_back(nd.id);
    return ids;
}

Feeder Feeder::with_impedances(const std::vector<LineImpedance>& impedances) const {
    if (impedances.size() != lines_.size())
        throw TopologyError("impedance list does not match line count");
    auto lines = lines_;
    for (std::size_t k = 0; k < lines.size(); ++k) lines[k].impedance = impedances[k];
    return Feeder(nodes_, std::move(lines), substation_, base_kv_, base_mva_, name_);
}

namespace {

template <typename T>
T field(const nlohmann::json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key))
        throw ParseError(std::string("missing field \"") + key + "\"");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("field \"") + key + "\": " + e.what());
    }
}

Matrix3c parse_block(const nlohmann::json& z) {
    if (!z.is_array() || z.size() != 3) throw ParseError("\"z\" must be a 3x3 array of [r, x]");
    Matrix3c m;
    for (int i = 0; i < 3; ++i) {
        const auto& row = z[i];
        if (!row.is_array() || row.size() != 3) throw ParseError("\"z\" rows must have 3 entries");
        for (int j = 0; j < 3; ++j) {
            const auto& e = row[j];
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ParseError("\"z\" entries must be [r, x] number pairs");
            m(i, j) = {e[0].get<double>(), e[1].get<double>()};
        }
    }
    return m;
}

}  // namespace

Feeder feeder_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("feeder document must be a JSON object");
    std::vector<Node> nodes;
    for (const auto& nd : field<nlohmann::json>(doc, "nodes")) {
        nodes.push_back({field<std::string>(nd, "id"),
                         PhaseSet::parse(field<std::string>(nd, "phases"))});
    }
    std::vector<Line> lines;
    for (const auto& ln : field<nlohmann::json>(doc, "lines")) {
        Line line;
        line.from = field<std::string>(ln, "from");
        line.to = field<std::string>(ln, "to");
        line.id = ln.contains("id") ? field<std::string>(ln, "id") : line.from + "_" + line.to;
        const Matrix3c z = parse_block(field<nlohmann::json>(ln, "z"));
        PhaseSet ph;
        if (ln.contains("phases")) {
            ph = PhaseSet::parse(field<std::string>(ln, "phases"));
        } else {
            for (std::size_t i = 0; i < 3; ++i)
                if (std::abs(z(Eigen::Index(i), Eigen::Index(i))) > 0.0) ph.insert(Phase(i));
        }
        line.impedance = LineImpedance(z, ph);
        lines.push_back(std::move(line));
    }
    const double base_kv = doc.contains("base_kv") ? field<double>(doc, "base_kv") : 1.0;
    const double base_mva = doc.contains("base_mva") ? field<double>(doc, "base_mva") : 1.0;
    if (!(base_kv > 0.0) || !(base_mva > 0.0)) throw ParseError("bases must be positive");
    return Feeder(std::move(nodes), std::move(lines), field<std::string>(doc, "substation"),
                  base_kv, base_mva, doc.value("name", std::string{}));
}

nlohmann::json feeder_to_json(const Feeder& f) {
    nlohmann::json doc;
    if (!f.name().empty()) doc["name"] = f.name();
    doc["base_kv"] = f.base_kv();
    doc["base_mva"] = f.base_mva();
    doc["substation"] = f.substation();
    doc["nodes"] = nlohmann::json::array();
    for (const auto& nd : f.nodes())
        doc["nodes"].push_back({{"id", nd.id}, {"phases", nd.phases.to_string()}});
    doc["lines"] = nlohmann::json::array();
    for (const auto& ln : f.lines()) {
        nlohmann::json z = nlohmann::json::array();
        for (int i = 0; i < 3; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < 3; ++j)
                row.push_back({ln.impedance.z(i, j).real(), ln.impedance.z(i, j).imag()});
            z.push_back(row);
        }
        doc["lines"].push_back({{"id", ln.id},
                                {"from", ln.from},
                                {"to", ln.to},
                                {"phases", ln.impedance.phases.to_string()},
                                {"z", z}});
    }
    return doc;
}

Feeder load_feeder(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open feeder file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return feeder_from_json(doc);
}

std::vector<std::size_t> path_to_substation(const Feeder& f, const std::string& node_id) {
    std::vector<std::size_t> path;
    std::size_t i = f.node_index(node_id);
    while (auto k = f.parent_line(i)) {
        path.push_back(*k);
        i = f.parent_node(i);
    }
    return path;
}

Matrix3c path_impedance(const Feeder& f, const std::string& node_id) {
    Matrix3c sum = Matrix3c::Zero();
    for (std::size_t k : path_to_substation(f, node_id)) sum += f.lines()[k].impedance.z;
    return sum;
}

}  // namespace gridstab

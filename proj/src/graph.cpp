#include "graphfb/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "graphfb/random.hpp"

namespace graphfb {

namespace fs = std::filesystem;
using nlohmann::json;

Graph Graph::from_edges(std::size_t n_nodes, std::span<const Edge> edges, DenseMatrix features,
                        std::vector<int> labels, std::size_t n_classes, EdgeCleanup* cleanup) {
    if (labels.size() != n_nodes) {
        throw Error("graph: " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(n_nodes) + " nodes");
    }
    if (features.rows() != n_nodes) {
        throw Error("graph: feature matrix has " + std::to_string(features.rows()) +
                    " rows for " + std::to_string(n_nodes) + " nodes");
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
            throw Error("graph: label " + std::to_string(labels[i]) + " of node " +
                        std::to_string(i) + " outside [0, " + std::to_string(n_classes) + ")");
        }
    }

    EdgeCleanup stats;
    std::vector<Edge> directed;
    directed.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
        if (u >= n_nodes || v >= n_nodes) {
            throw Error("graph: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                        ") references a node outside [0, " + std::to_string(n_nodes) + ")");
        }
        if (u == v) {
            ++stats.self_loops;
            continue;
        }
        directed.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(directed.begin(), directed.end());
    const auto before = directed.size();
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
    stats.duplicates = before - directed.size();

    Graph g;
    g.offsets_.assign(n_nodes + 1, 0);
    for (auto [u, v] : directed) {
        ++g.offsets_[u + 1];
        ++g.offsets_[v + 1];
    }
    std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
    g.neighbors_.resize(directed.size() * 2);
    std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (auto [u, v] : directed) {
        g.neighbors_[cursor[u]++] = v;
        g.neighbors_[cursor[v]++] = u;
    }
    for (std::size_t i = 0; i < n_nodes; ++i) {
        std::sort(g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i]),
                  g.neighbors_.begin() + static_cast<std::ptrdiff_t>(g.offsets_[i + 1]));
    }
    g.features_ = std::move(features);
    g.labels_ = std::move(labels);
    g.n_classes_ = n_classes;
    if (cleanup) *cleanup = stats;
    return g;
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
    auto nb = neighbors(i);
    return std::binary_search(nb.begin(), nb.end(), j);
}

std::vector<std::size_t> Graph::degrees() const {
    std::vector<std::size_t> d(n_nodes());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = degree(i);
    return d;
}

std::vector<Edge> Graph::edge_list() const {
    std::vector<Edge> out;
    out.reserve(n_edges());
    for (std::size_t i = 0; i < n_nodes(); ++i)
        for (std::size_t j : neighbors(i))
            if (i < j) out.emplace_back(i, j);
    return out;
}

Graph Graph::with_features(DenseMatrix features) const {
    if (features.rows() != n_nodes()) {
        throw Error("graph: replacement features have " + std::to_string(features.rows()) +
                    " rows for " + std::to_string(n_nodes()) + " nodes");
    }
    Graph g = *this;
    g.features_ = std::move(features);
    return g;
}

Graph Graph::permuted(std::span<const std::size_t> perm) const {
    const std::size_t n = n_nodes();
    if (perm.size() != n) throw Error("graph: permutation size mismatch");
    std::vector<Edge> edges;
    for (auto [u, v] : edge_list()) edges.emplace_back(perm[u], perm[v]);
    DenseMatrix x(n, n_features());
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto src = features_.row(i);
        std::copy(src.begin(), src.end(), x.row(perm[i]).begin());
        y[perm[i]] = labels_[i];
    }
    return from_edges(n, edges, std::move(x), std::move(y), n_classes_);
}

DenseMatrix row_normalize(const DenseMatrix& features) {
    DenseMatrix out = features;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        double s = 0.0;
        for (double v : row) s += std::abs(v);
        if (s == 0.0) continue;
        for (double& v : row) v /= s;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Raw import
// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string_view> split_on(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::ifstream open_input(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    if (!in) throw Error("missing " + what + ": " + path.string());
    return in;
}

std::string location(const fs::path& path, std::size_t line_no) {
    return path.filename().string() + ":" + std::to_string(line_no);
}

}  // namespace

ImportResult import_raw(const fs::path& node_file, const fs::path& edge_file,
                        const ImportOptions& options) {
    struct NodeRecord {
        std::size_t id;
        std::vector<double> features;
        long label;
    };
    std::vector<NodeRecord> records;
    {
        auto in = open_input(node_file, "node file");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto body = trim(line);
            if (body.empty()) continue;
            auto fields = split_on(body, '\t');
            std::size_t id = 0;
            if (!parse_number(fields[0], id)) {
                if (records.empty() && line_no == 1) continue;  // header
                throw Error("node file " + location(node_file, line_no) + ": bad node id");
            }
            if (fields.size() != 3) {
                throw Error("node file " + location(node_file, line_no) +
                            ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
            }
            NodeRecord rec{id, {}, 0};
            if (!trim(fields[1]).empty()) {
                for (auto tok : split_on(fields[1], ',')) {
                    double v = 0.0;
                    if (!parse_number(tok, v)) {
                        throw Error("node file " + location(node_file, line_no) +
                                    ": bad feature value '" + std::string(tok) + "'");
                    }
                    rec.features.push_back(v);
                }
            }
            if (!parse_number(fields[2], rec.label)) {
                throw Error("node file " + location(node_file, line_no) + ": bad label");
            }
            records.push_back(std::move(rec));
        }
    }
    if (records.empty()) throw Error("node file " + node_file.string() + ": no nodes");

    const std::size_t n = records.size();
    std::vector<char> seen(n, 0);
    for (const auto& r : records) {
        if (r.id >= n || seen[r.id]) {
            throw Error("node ids are not contiguous 0.." + std::to_string(n - 1) +
                        " (offending id " + std::to_string(r.id) + ")");
        }
        seen[r.id] = 1;
    }
    const std::size_t f = records.front().features.size();
    long max_label = -1;
    for (const auto& r : records) {
        if (r.features.size() != f) {
            throw Error("ragged feature rows: node " + std::to_string(r.id) + " has " +
                        std::to_string(r.features.size()) + " values, expected " +
                        std::to_string(f));
        }
        if (r.label < 0) {
            throw Error("label " + std::to_string(r.label) + " of node " + std::to_string(r.id) +
                        " is negative");
        }
        max_label = std::max(max_label, r.label);
    }
    const std::size_t n_classes =
        options.n_classes.value_or(static_cast<std::size_t>(max_label) + 1);
    if (static_cast<std::size_t>(max_label) >= n_classes) {
        throw Error("label " + std::to_string(max_label) + " outside declared range [0, " +
                    std::to_string(n_classes) + ")");
    }

    DenseMatrix features(n, f);
    std::vector<int> labels(n);
    for (auto& r : records) {
        std::copy(r.features.begin(), r.features.end(), features.row(r.id).begin());
        labels[r.id] = static_cast<int>(r.label);
    }
    if (options.row_normalize) features = row_normalize(features);

    std::vector<Edge> edges;
    {
        auto in = open_input(edge_file, "edge file");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto toks = split_ws(line);
            if (toks.empty()) continue;
            std::size_t u = 0, v = 0;
            const bool ok = toks.size() >= 2 && parse_number(toks[0], u) && parse_number(toks[1], v);
            if (!ok) {
                if (edges.empty() && line_no == 1) continue;  // header
                throw Error("edge file " + location(edge_file, line_no) + ": expected '<src> <dst>'");
            }
            if (u >= n || v >= n) {
                throw Error("edge file " + location(edge_file, line_no) + ": node id out of range");
            }
            edges.emplace_back(u, v);
        }
    }
    if (edges.empty()) throw Error("edge file " + edge_file.string() + ": empty edge set");

    ImportResult result;
    result.graph = Graph::from_edges(n, edges, std::move(features), std::move(labels), n_classes,
                                     &result.cleanup);
    return result;
}

// ---------------------------------------------------------------------------
// Canonical layout
// ---------------------------------------------------------------------------

namespace {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, ptr);
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_canonical(const Graph& graph, const fs::path& dir) {
    fs::create_directories(dir);
    json meta = {{"n_nodes", graph.n_nodes()},
                 {"n_features", graph.n_features()},
                 {"n_classes", graph.n_classes()}};

    std::string edges;
    for (auto [u, v] : graph.edge_list()) {
        edges += std::to_string(u);
        edges += '\t';
        edges += std::to_string(v);
        edges += '\n';
    }
    std::string features;
    for (std::size_t r = 0; r < graph.n_nodes(); ++r) {
        auto row = graph.features().row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) features += '\t';
            features += format_double(row[c]);
        }
        features += '\n';
    }
    std::string labels;
    for (int y : graph.labels()) {
        labels += std::to_string(y);
        labels += '\n';
    }
    write_file_atomic(dir / "edges.tsv", edges);
    write_file_atomic(dir / "features.tsv", features);
    write_file_atomic(dir / "labels.tsv", labels);
    write_file_atomic(dir / "meta.json", meta.dump() + "\n");
}

Graph load_canonical(const fs::path& dir) {
    for (const char* name : {"meta.json", "edges.tsv", "features.tsv", "labels.tsv"}) {
        if (!fs::exists(dir / name)) {
            std::string what = fs::path(name).stem().string();
            throw Error("missing " + what + ": " + (dir / name).string());
        }
    }
    json meta;
    try {
        meta = json::parse(read_file(dir / "meta.json"));
    } catch (const json::exception& e) {
        throw Error("meta.json: " + std::string(e.what()));
    }
    const auto n = meta.at("n_nodes").get<std::size_t>();
    const auto f = meta.at("n_features").get<std::size_t>();
    const auto c = meta.at("n_classes").get<std::size_t>();

    std::vector<int> labels;
    {
        auto in = open_input(dir / "labels.tsv", "labels");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            int y = 0;
            if (!parse_number(std::string_view(line), y)) {
                throw Error("labels.tsv:" + std::to_string(line_no) + ": bad label");
            }
            labels.push_back(y);
        }
    }
    if (labels.size() != n) {
        throw Error("meta/file inconsistency: labels.tsv has " + std::to_string(labels.size()) +
                    " rows, meta.json says n_nodes=" + std::to_string(n));
    }

    DenseMatrix features(n, f);
    {
        auto in = open_input(dir / "features.tsv", "features");
        std::string line;
        std::size_t r = 0;
        while (std::getline(in, line)) {
            if (trim(line).empty() && f > 0) continue;
            if (r >= n) throw Error("meta/file inconsistency: features.tsv has extra rows");
            auto toks = f == 0 ? std::vector<std::string_view>{} : split_on(trim(line), '\t');
            if (toks.size() != f) {
                throw Error("meta/file inconsistency: features.tsv row " + std::to_string(r) +
                            " has " + std::to_string(toks.size()) + " values, meta says " +
                            std::to_string(f));
            }
            for (std::size_t j = 0; j < f; ++j) {
                if (!parse_number(toks[j], features(r, j))) {
                    throw Error("features.tsv row " + std::to_string(r) + ": bad value");
                }
            }
            ++r;
        }
        if (r != n && f > 0) {
            throw Error("meta/file inconsistency: features.tsv has " + std::to_string(r) +
                        " rows, meta.json says n_nodes=" + std::to_string(n));
        }
    }

    std::vector<Edge> edges;
    {
        auto in = open_input(dir / "edges.tsv", "edges");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto toks = split_ws(line);
            if (toks.empty()) continue;
            std::size_t u = 0, v = 0;
            if (toks.size() != 2 || !parse_number(toks[0], u) || !parse_number(toks[1], v)) {
                throw Error("edges.tsv:" + std::to_string(line_no) + ": bad edge");
            }
            if (u >= n || v >= n) {
                throw Error("meta/file inconsistency: edges.tsv:" + std::to_string(line_no) +
                            " references node outside n_nodes");
            }
            edges.emplace_back(u, v);
        }
    }
    return Graph::from_edges(n, edges, std::move(features), std::move(labels), c);
}

Graph load_dataset(const fs::path& dir, bool row_normalize_features) {
    Graph g;
    if (fs::exists(dir / "meta.json")) {
        g = load_canonical(dir);
    } else if (fs::exists(dir / "out1_node_feature_label.txt")) {
        g = import_raw(dir / "out1_node_feature_label.txt", dir / "out1_graph_edges.txt").graph;
    } else {
        throw Error("no dataset found in " + dir.string());
    }
    if (row_normalize_features) g = g.with_features(row_normalize(g.features()));
    return g;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

std::array<std::size_t, 3> split_sizes(std::size_t n_nodes, const std::array<double, 3>& ratios) {
    const auto count = [&](double r) {
        return static_cast<std::size_t>(std::floor(r * static_cast<double>(n_nodes) + 1e-9));
    };
    const std::size_t train = count(ratios[0]);
    const std::size_t val = std::min(count(ratios[1]), n_nodes - train);
    return {train, val, n_nodes - train - val};
}

SplitSet make_splits(std::size_t n_nodes, const std::array<double, 3>& ratios, std::uint64_t seed,
                     std::size_t count) {
    if (count == 0) throw Error("splits: count must be at least 1");
    const double total = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(total - 1.0) > 1e-9) {
        throw Error("splits: ratios sum to " + format_double(total) + ", expected 1");
    }
    for (double r : ratios) {
        if (r < 0.0) throw Error("splits: negative ratio");
    }
    const auto sizes = split_sizes(n_nodes, ratios);
    SplitSet set;
    set.seed = seed;
    set.ratios = ratios;
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<std::size_t> perm(n_nodes);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(Rng::mix(seed, k));
        rng.shuffle(std::span(perm));
        Split s;
        auto it = perm.begin();
        s.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
        it += static_cast<std::ptrdiff_t>(sizes[0]);
        s.val.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
        it += static_cast<std::ptrdiff_t>(sizes[1]);
        s.test.assign(it, perm.end());
        std::sort(s.train.begin(), s.train.end());
        std::sort(s.val.begin(), s.val.end());
        std::sort(s.test.begin(), s.test.end());
        set.splits.push_back(std::move(s));
    }
    return set;
}

std::string splits_to_json(const SplitSet& splits) {
    json j;
    j["seed"] = splits.seed;
    j["ratios"] = splits.ratios;
    j["splits"] = json::array();
    for (const auto& s : splits.splits) {
        j["splits"].push_back({{"train", s.train}, {"val", s.val}, {"test", s.test}});
    }
    return j.dump() + "\n";
}

SplitSet splits_from_json(const std::string& text) {
    try {
        auto j = json::parse(text);
        SplitSet set;
        set.seed = j.at("seed").get<std::uint64_t>();
        set.ratios = j.at("ratios").get<std::array<double, 3>>();
        for (const auto& s : j.at("splits")) {
            set.splits.push_back({s.at("train").get<std::vector<std::size_t>>(),
                                  s.at("val").get<std::vector<std::size_t>>(),
                                  s.at("test").get<std::vector<std::size_t>>()});
        }
        return set;
    } catch (const json::exception& e) {
        throw Error("splits file: " + std::string(e.what()));
    }
}

void save_splits(const SplitSet& splits, const fs::path& file) {
    write_file_atomic(file, splits_to_json(splits));
}

SplitSet load_splits(const fs::path& file) { return splits_from_json(read_file(file)); }

}  // namespace graphfb

#include "bdfns/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "bdfns/errors.hpp"

namespace bdfns {

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b)
{
    return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

double signed_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c)
{
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double longest_edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c)
{
    return std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
}

} // namespace

Mesh::Mesh(std::vector<Eigen::Vector2d> vertices, std::vector<std::array<int, 3>> triangles,
           std::vector<BoundaryEdge> boundary_edges)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)),
      boundary_edges_(std::move(boundary_edges))
{
    const int nv = static_cast<int>(vertices_.size());
    if (triangles_.empty()) {
        throw ValidationError("mesh has no triangles");
    }

    std::vector<bool> used(vertices_.size(), false);
    std::map<EdgeKey, int> edge_count;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (int v : tri) {
            if (v < 0 || v >= nv) {
                throw ValidationError("triangle " + std::to_string(t) + " references vertex " +
                                      std::to_string(v) + " out of range");
            }
            used[static_cast<std::size_t>(v)] = true;
        }
        if (!(area(t) > 0.0)) {
            throw ValidationError("triangle " + std::to_string(t) + " has non-positive area");
        }
        for (int k = 0; k < 3; ++k) {
            const int count = ++edge_count[edge_key(tri[k], tri[(k + 1) % 3])];
            if (count > 2) {
                throw ValidationError("edge (" + std::to_string(tri[k]) + ", " +
                                      std::to_string(tri[(k + 1) % 3]) +
                                      ") is shared by more than two triangles");
            }
        }
    }
    for (int v = 0; v < nv; ++v) {
        if (!used[static_cast<std::size_t>(v)]) {
            throw ValidationError("dangling vertex " + std::to_string(v));
        }
    }

    std::map<EdgeKey, int> listed;
    for (const auto& be : boundary_edges_) {
        const auto key = edge_key(be.vertices[0], be.vertices[1]);
        const auto it = edge_count.find(key);
        if (it == edge_count.end()) {
            throw ValidationError("boundary edge (" + std::to_string(key.first) + ", " +
                                  std::to_string(key.second) + ") is not a triangle edge");
        }
        if (it->second != 1) {
            throw ValidationError("boundary edge (" + std::to_string(key.first) + ", " +
                                  std::to_string(key.second) + ") is interior");
        }
        if (++listed[key] > 1) {
            throw ValidationError("boundary edge (" + std::to_string(key.first) + ", " +
                                  std::to_string(key.second) + ") listed twice");
        }
    }
    for (const auto& [key, count] : edge_count) {
        if (count == 1 && !listed.contains(key)) {
            throw ValidationError("edge (" + std::to_string(key.first) + ", " +
                                  std::to_string(key.second) + ") lies on the boundary but has no marker");
        }
    }

    h_max_ = 0.0;
    h_min_ = std::numeric_limits<double>::infinity();
    for (const auto& tri : triangles_) {
        const double h = longest_edge(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
        h_max_ = std::max(h_max_, h);
        h_min_ = std::min(h_min_, h);
    }
}

double Mesh::area(std::size_t t) const
{
    const auto& tri = triangles_.at(t);
    return signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
}

Mesh rectangle_mesh(int nx, int ny, double lx, double ly, std::array<int, 4> side_markers,
                    DiagonalPattern pattern)
{
    if (nx < 1 || ny < 1 || !(lx > 0.0) || !(ly > 0.0)) {
        throw std::invalid_argument("rectangle_mesh: need nx, ny >= 1 and positive extents");
    }
    const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };

    std::vector<Eigen::Vector2d> vertices;
    vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            vertices.emplace_back(lx * i / nx, ly * j / ny);
        }
    }

    std::vector<std::array<int, 3>> triangles;
    triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = id(i, j);
            const int b = id(i + 1, j);
            const int c = id(i + 1, j + 1);
            const int d = id(i, j + 1);
            if (pattern == DiagonalPattern::Alternating && (i + j) % 2 == 1) {
                triangles.push_back({a, b, d});
                triangles.push_back({b, c, d});
            } else {
                triangles.push_back({a, b, c});
                triangles.push_back({a, c, d});
            }
        }
    }

    std::vector<BoundaryEdge> boundary;
    for (int i = 0; i < nx; ++i) {
        boundary.push_back({{id(i, 0), id(i + 1, 0)}, side_markers[0]});
    }
    for (int j = 0; j < ny; ++j) {
        boundary.push_back({{id(nx, j), id(nx, j + 1)}, side_markers[1]});
    }
    for (int i = nx; i > 0; --i) {
        boundary.push_back({{id(i, ny), id(i - 1, ny)}, side_markers[2]});
    }
    for (int j = ny; j > 0; --j) {
        boundary.push_back({{id(0, j), id(0, j - 1)}, side_markers[3]});
    }
    return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

Mesh unit_square_mesh(int n, DiagonalPattern pattern)
{
    if (n < 1) {
        throw std::invalid_argument("unit_square_mesh: n must be >= 1");
    }
    return rectangle_mesh(n, n, 1.0, 1.0, {1, 1, 1, 1}, pattern);
}

namespace {

class LineReader {
public:
    LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    // Next non-empty line with comments stripped, tokenized.
    std::istringstream next(const char* expecting)
    {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (const auto hash = line.find('#'); hash != std::string::npos) {
                line.erase(hash);
            }
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                return std::istringstream(line);
            }
        }
        throw ParseError(path_, line_no_, std::string("unexpected end of file, expecting ") + expecting);
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_no_, what); }

    [[nodiscard]] int line() const noexcept { return line_no_; }

    template <typename... Ts>
    void read_exact(std::istringstream& ss, const char* what, Ts&... out)
    {
        if (!((ss >> out) && ...)) {
            fail(std::string("malformed ") + what);
        }
        std::string extra;
        if (ss >> extra) {
            fail(std::string("trailing token '") + extra + "' in " + what);
        }
    }

    std::size_t read_count(const char* keyword)
    {
        auto ss = next(keyword);
        std::string word;
        long long count = -1;
        read_exact(ss, keyword, word, count);
        if (word != keyword || count < 0) {
            fail(std::string("expected '") + keyword + " <count>'");
        }
        return static_cast<std::size_t>(count);
    }

private:
    std::istream& in_;
    std::string path_;
    int line_no_ = 0;
};

} // namespace

Mesh read_mesh(const std::filesystem::path& path, std::vector<std::string>* warnings)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path.string(), 0, "cannot open mesh file");
    }
    LineReader reader(in, path.string());

    {
        auto ss = reader.next("header");
        std::string tag;
        std::string version;
        reader.read_exact(ss, "header", tag, version);
        if (tag != "mesh2d" || version != "v1") {
            reader.fail("expected header 'mesh2d v1'");
        }
    }

    std::vector<Eigen::Vector2d> vertices(reader.read_count("vertices"));
    for (auto& v : vertices) {
        auto ss = reader.next("vertex");
        reader.read_exact(ss, "vertex", v.x(), v.y());
    }

    std::vector<std::array<int, 3>> triangles(reader.read_count("triangles"));
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        auto ss = reader.next("triangle");
        auto& tri = triangles[t];
        reader.read_exact(ss, "triangle", tri[0], tri[1], tri[2]);
        for (int v : tri) {
            if (v < 0 || static_cast<std::size_t>(v) >= vertices.size()) {
                reader.fail("vertex index " + std::to_string(v) + " out of range");
            }
        }
        const double a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if (a < 0.0) {
            std::swap(tri[1], tri[2]);
            const std::string msg = path.string() + ":" + std::to_string(reader.line()) +
                                    ": triangle " + std::to_string(t) +
                                    " was negatively oriented; swapped its last two vertices";
            if (warnings != nullptr) {
                warnings->push_back(msg);
            } else {
                std::cerr << "warning: " << msg << '\n';
            }
        }
    }

    std::vector<BoundaryEdge> boundary(reader.read_count("boundary"));
    for (auto& be : boundary) {
        auto ss = reader.next("boundary edge");
        reader.read_exact(ss, "boundary edge", be.vertices[0], be.vertices[1], be.marker);
    }

    {
        std::string line;
        while (std::getline(in, line)) {
            if (const auto hash = line.find('#'); hash != std::string::npos) {
                line.erase(hash);
            }
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw ParseError(path.string(), reader.line() + 1, "unexpected content after boundary section");
            }
        }
    }

    return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

void write_mesh(const Mesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write mesh file " + path.string());
    }
    out << "mesh2d v1\n";
    out << std::setprecision(17);
    out << "vertices " << mesh.vertices().size() << '\n';
    for (const auto& v : mesh.vertices()) {
        out << v.x() << ' ' << v.y() << '\n';
    }
    out << "triangles " << mesh.triangles().size() << '\n';
    for (const auto& t : mesh.triangles()) {
        out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    out << "boundary " << mesh.boundary_edges().size() << '\n';
    for (const auto& be : mesh.boundary_edges()) {
        out << be.vertices[0] << ' ' << be.vertices[1] << ' ' << be.marker << '\n';
    }
    if (!out) {
        throw std::runtime_error("error while writing mesh file " + path.string());
    }
}

MeshStats mesh_stats(const Mesh& mesh)
{
    return {mesh.h_max(), mesh.h_min(), mesh.quasi_uniformity(), mesh.triangles().size(),
            mesh.vertices().size()};
}

} // namespace bdfns

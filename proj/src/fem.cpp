#include "bdfns/fem.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>

namespace bdfns {

namespace {

using Triplet = Eigen::Triplet<double, int>;

std::vector<QuadraturePoint> make_degree5_rule()
{
    const double r15 = std::sqrt(15.0);
    const double a1 = (9.0 - 2.0 * r15) / 21.0;
    const double b1 = (6.0 + r15) / 21.0;
    const double w1 = (155.0 + r15) / 1200.0;
    const double a2 = (9.0 + 2.0 * r15) / 21.0;
    const double b2 = (6.0 - r15) / 21.0;
    const double w2 = (155.0 - r15) / 1200.0;
    return {
        {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 9.0 / 40.0},
        {{a1, b1, b1}, w1},
        {{b1, a1, b1}, w1},
        {{b1, b1, a1}, w1},
        {{a2, b2, b2}, w2},
        {{b2, a2, b2}, w2},
        {{b2, b2, a2}, w2},
    };
}

// Gauss-Legendre on the unit square collapsed onto the reference triangle
// (xi, eta) = (u, v (1 - u)).
std::vector<QuadraturePoint> make_collapsed_rule()
{
    using Rule = boost::math::quadrature::gauss<double, 6>;
    std::vector<double> nodes;
    std::vector<double> weights;
    const auto& abs = Rule::abscissa();
    const auto& wts = Rule::weights();
    for (std::size_t i = 0; i < abs.size(); ++i) {
        nodes.push_back(0.5 * (1.0 - abs[i]));
        weights.push_back(0.5 * wts[i]);
        if (abs[i] != 0.0) {
            nodes.push_back(0.5 * (1.0 + abs[i]));
            weights.push_back(0.5 * wts[i]);
        }
    }
    std::vector<QuadraturePoint> rule;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const double u = nodes[i];
            const double xi = u;
            const double eta = nodes[j] * (1.0 - u);
            // Reference area is 1/2, hence the factor 2 for area fractions.
            rule.push_back({{1.0 - xi - eta, xi, eta}, 2.0 * weights[i] * weights[j] * (1.0 - u)});
        }
    }
    return rule;
}

struct Local {
    std::array<double, 6> phi;
    std::array<Eigen::Vector2d, 6> grad;
    double weight; // quadrature weight times area
};

template <typename Fn>
void for_each_point(const ElementGeometry& geom, std::span<const QuadraturePoint> rule, Fn&& fn)
{
    for (const auto& qp : rule) {
        Local l{p2_values(qp.barycentric), p2_gradients(qp.barycentric, geom), qp.weight * geom.area};
        fn(qp, l);
    }
}

SparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols, const std::vector<Triplet>& trip)
{
    SparseMatrix m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

struct LocalField {
    Eigen::Vector2d value = Eigen::Vector2d::Zero();
    Eigen::Matrix2d grad = Eigen::Matrix2d::Zero(); // (component, coordinate)
};

LocalField evaluate(const Local& l, const std::array<std::array<double, 6>, 2>& coeffs)
{
    LocalField f;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 6; ++i) {
            f.value(c) += coeffs[c][i] * l.phi[i];
            f.grad.row(c) += coeffs[c][i] * l.grad[i].transpose();
        }
    }
    return f;
}

std::array<std::array<double, 6>, 2> gather(const MixedSpace& space, int tri, const Vector& v)
{
    std::array<std::array<double, 6>, 2> out{};
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 6; ++i) {
            out[c][i] = v(space.velocity_dof(tri, i, c));
        }
    }
    return out;
}

} // namespace

std::span<const QuadraturePoint> assembly_quadrature()
{
    static const std::vector<QuadraturePoint> rule = make_degree5_rule();
    return rule;
}

std::span<const QuadraturePoint> error_quadrature()
{
    static const std::vector<QuadraturePoint> rule = make_collapsed_rule();
    return rule;
}

std::array<double, 6> p2_values(const std::array<double, 3>& b)
{
    return {b[0] * (2.0 * b[0] - 1.0), b[1] * (2.0 * b[1] - 1.0), b[2] * (2.0 * b[2] - 1.0),
            4.0 * b[0] * b[1],         4.0 * b[1] * b[2],         4.0 * b[2] * b[0]};
}

std::array<Eigen::Vector2d, 6> p2_gradients(const std::array<double, 3>& b, const ElementGeometry& geom)
{
    const auto& g = geom.grad_barycentric;
    return {(4.0 * b[0] - 1.0) * g[0],
            (4.0 * b[1] - 1.0) * g[1],
            (4.0 * b[2] - 1.0) * g[2],
            4.0 * (b[0] * g[1] + b[1] * g[0]),
            4.0 * (b[1] * g[2] + b[2] * g[1]),
            4.0 * (b[2] * g[0] + b[0] * g[2])};
}

MixedSpace::MixedSpace(Mesh mesh, std::set<int> dirichlet_markers)
    : mesh_(std::move(mesh)), markers_(std::move(dirichlet_markers))
{
    const int nv = static_cast<int>(mesh_.vertices().size());
    std::map<std::pair<int, int>, int> edge_index;
    element_nodes_.reserve(mesh_.triangles().size());
    for (const auto& tri : mesh_.triangles()) {
        std::array<int, 6> nodes{tri[0], tri[1], tri[2], 0, 0, 0};
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k];
            const int b = tri[(k + 1) % 3];
            const auto key = std::minmax(a, b);
            auto [it, inserted] = edge_index.try_emplace(key, static_cast<int>(edges_.size()));
            if (inserted) {
                edges_.push_back({key.first, key.second});
            }
            nodes[3 + k] = nv + it->second;
        }
        element_nodes_.push_back(nodes);
    }
    n_nodes_ = nv + static_cast<int>(edges_.size());

    dirichlet_.assign(static_cast<std::size_t>(n_u()), false);
    const auto mark = [&](int node) {
        dirichlet_[static_cast<std::size_t>(node)] = true;
        dirichlet_[static_cast<std::size_t>(n_nodes_ + node)] = true;
    };
    for (const auto& be : mesh_.boundary_edges()) {
        if (!markers_.contains(be.marker)) {
            continue;
        }
        mark(be.vertices[0]);
        mark(be.vertices[1]);
        mark(nv + edge_index.at(std::minmax(be.vertices[0], be.vertices[1])));
    }
}

Eigen::Vector2d MixedSpace::node_point(int node) const
{
    const int nv = n_p();
    if (node < nv) {
        return mesh_.vertices()[static_cast<std::size_t>(node)];
    }
    const auto& e = edges_[static_cast<std::size_t>(node - nv)];
    return 0.5 * (mesh_.vertices()[static_cast<std::size_t>(e[0])] +
                  mesh_.vertices()[static_cast<std::size_t>(e[1])]);
}

ElementGeometry MixedSpace::geometry(int tri) const
{
    const auto& t = mesh_.triangles()[static_cast<std::size_t>(tri)];
    ElementGeometry g;
    for (int k = 0; k < 3; ++k) {
        g.vertices[k] = mesh_.vertices()[static_cast<std::size_t>(t[k])];
    }
    const double two_area = (g.vertices[1].x() - g.vertices[0].x()) * (g.vertices[2].y() - g.vertices[0].y()) -
                            (g.vertices[2].x() - g.vertices[0].x()) * (g.vertices[1].y() - g.vertices[0].y());
    g.area = 0.5 * two_area;
    for (int i = 0; i < 3; ++i) {
        const auto& vj = g.vertices[(i + 1) % 3];
        const auto& vk = g.vertices[(i + 2) % 3];
        g.grad_barycentric[i] = Eigen::Vector2d(vj.y() - vk.y(), vk.x() - vj.x()) / two_area;
    }
    return g;
}

MixedSpace build_mixed_space(const Mesh& mesh, std::set<int> dirichlet_markers)
{
    return MixedSpace(mesh, std::move(dirichlet_markers));
}

AssembledOperators assemble_linear_operators(const MixedSpace& space, double nu, double mu,
                                             std::span<const int> element_order)
{
    if (!(nu > 0.0) || !(mu >= 0.0)) {
        throw std::invalid_argument("assemble_linear_operators: need nu > 0 and mu >= 0");
    }
    std::vector<int> order(element_order.begin(), element_order.end());
    if (order.empty()) {
        order.resize(static_cast<std::size_t>(space.n_elements()));
        std::iota(order.begin(), order.end(), 0);
    } else if (order.size() != static_cast<std::size_t>(space.n_elements())) {
        throw std::invalid_argument("assemble_linear_operators: element order has wrong length");
    }

    const int nn = space.n_nodes();
    std::vector<Triplet> mass;
    std::vector<Triplet> stiff;
    std::vector<Triplet> div;
    std::vector<Triplet> graddiv;
    std::vector<Triplet> pmass;
    Vector pmean = Vector::Zero(space.n_p());

    for (int tri : order) {
        const auto geom = space.geometry(tri);
        const auto& nodes = space.element_nodes(tri);
        Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 6> k = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 3, 12> b = Eigen::Matrix<double, 3, 12>::Zero();
        Eigen::Matrix<double, 12, 12> gd = Eigen::Matrix<double, 12, 12>::Zero();
        Eigen::Matrix3d mp = Eigen::Matrix3d::Zero();
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();

        for_each_point(geom, assembly_quadrature(), [&](const QuadraturePoint& qp, const Local& l) {
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    m(i, j) += l.weight * l.phi[i] * l.phi[j];
                    k(i, j) += l.weight * l.grad[i].dot(l.grad[j]);
                }
            }
            for (int a = 0; a < 3; ++a) {
                mean(a) += l.weight * qp.barycentric[a];
                for (int c = 0; c < 3; ++c) {
                    mp(a, c) += l.weight * qp.barycentric[a] * qp.barycentric[c];
                }
                for (int j = 0; j < 6; ++j) {
                    for (int c = 0; c < 2; ++c) {
                        b(a, c * 6 + j) += l.weight * qp.barycentric[a] * l.grad[j](c);
                    }
                }
            }
            for (int i = 0; i < 12; ++i) {
                for (int j = 0; j < 12; ++j) {
                    gd(i, j) += l.weight * l.grad[i % 6](i / 6) * l.grad[j % 6](j / 6);
                }
            }
        });

        const auto& verts = space.mesh().triangles()[static_cast<std::size_t>(tri)];
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) {
                for (int c = 0; c < 2; ++c) {
                    mass.emplace_back(c * nn + nodes[i], c * nn + nodes[j], m(i, j));
                    stiff.emplace_back(c * nn + nodes[i], c * nn + nodes[j], nu * k(i, j));
                }
            }
        }
        for (int i = 0; i < 12; ++i) {
            for (int j = 0; j < 12; ++j) {
                graddiv.emplace_back((i / 6) * nn + nodes[i % 6], (j / 6) * nn + nodes[j % 6], mu * gd(i, j));
            }
        }
        for (int a = 0; a < 3; ++a) {
            pmean(verts[a]) += mean(a);
            for (int c = 0; c < 3; ++c) {
                pmass.emplace_back(verts[a], verts[c], mp(a, c));
            }
            for (int j = 0; j < 12; ++j) {
                div.emplace_back(verts[a], (j / 6) * nn + nodes[j % 6], b(a, j));
            }
        }
    }

    const int nu_dofs = space.n_u();
    const int np_dofs = space.n_p();
    return {from_triplets(nu_dofs, nu_dofs, mass),  from_triplets(nu_dofs, nu_dofs, stiff),
            from_triplets(np_dofs, nu_dofs, div),    from_triplets(nu_dofs, nu_dofs, graddiv),
            from_triplets(np_dofs, np_dofs, pmass),  std::move(pmean)};
}

SparseMatrix assemble_convection(const MixedSpace& space, const Vector& w)
{
    const int nn = space.n_nodes();
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(space.n_elements()) * 72);
    for (int tri = 0; tri < space.n_elements(); ++tri) {
        const auto geom = space.geometry(tri);
        const auto& nodes = space.element_nodes(tri);
        const auto wl = gather(space, tri, w);
        Eigen::Matrix<double, 6, 6> n = Eigen::Matrix<double, 6, 6>::Zero();
        for_each_point(geom, assembly_quadrature(), [&](const QuadraturePoint&, const Local& l) {
            const auto wf = evaluate(l, wl);
            const double half_div = 0.5 * wf.grad.trace();
            for (int j = 0; j < 6; ++j) {
                const double trial = wf.value.dot(l.grad[j]) + half_div * l.phi[j];
                for (int i = 0; i < 6; ++i) {
                    n(i, j) += l.weight * trial * l.phi[i];
                }
            }
        });
        for (int i = 0; i < 6; ++i) {
            for (int j = 0; j < 6; ++j) {
                for (int c = 0; c < 2; ++c) {
                    trip.emplace_back(c * nn + nodes[i], c * nn + nodes[j], n(i, j));
                }
            }
        }
    }
    return from_triplets(space.n_u(), space.n_u(), trip);
}

SparseMatrix assemble_convection_jacobian(const MixedSpace& space, const Vector& w)
{
    const int nn = space.n_nodes();
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(space.n_elements()) * 144);
    for (int tri = 0; tri < space.n_elements(); ++tri) {
        const auto geom = space.geometry(tri);
        const auto& nodes = space.element_nodes(tri);
        const auto wl = gather(space, tri, w);
        // Unknown ordering inside the element: (component, local node) -> c * 6 + i.
        Eigen::Matrix<double, 12, 12> jac = Eigen::Matrix<double, 12, 12>::Zero();
        for_each_point(geom, assembly_quadrature(), [&](const QuadraturePoint&, const Local& l) {
            const auto wf = evaluate(l, wl);
            const double half_div = 0.5 * wf.grad.trace();
            for (int j = 0; j < 6; ++j) {
                // b(w, v, .) with v = phi_j e_d: block diagonal in the component.
                const double conv = wf.value.dot(l.grad[j]) + half_div * l.phi[j];
                for (int c = 0; c < 2; ++c) {
                    for (int d = 0; d < 2; ++d) {
                        // b(v, w, .): (v . grad) w_c + 1/2 (div v) w_c.
                        double trial = l.phi[j] * wf.grad(c, d) + 0.5 * l.grad[j](d) * wf.value(c);
                        if (c == d) {
                            trial += conv;
                        }
                        for (int i = 0; i < 6; ++i) {
                            jac(c * 6 + i, d * 6 + j) += l.weight * trial * l.phi[i];
                        }
                    }
                }
            }
        });
        for (int r = 0; r < 12; ++r) {
            for (int s = 0; s < 12; ++s) {
                trip.emplace_back((r / 6) * nn + nodes[r % 6], (s / 6) * nn + nodes[s % 6], jac(r, s));
            }
        }
    }
    return from_triplets(space.n_u(), space.n_u(), trip);
}

Vector assemble_convection_vector(const MixedSpace& space, const Vector& a, const Vector& b)
{
    Vector out = Vector::Zero(space.n_u());
    for (int tri = 0; tri < space.n_elements(); ++tri) {
        const auto geom = space.geometry(tri);
        const auto al = gather(space, tri, a);
        const auto bl = gather(space, tri, b);
        for_each_point(geom, assembly_quadrature(), [&](const QuadraturePoint&, const Local& l) {
            const auto af = evaluate(l, al);
            const auto bf = evaluate(l, bl);
            const Eigen::Vector2d integrand = bf.grad * af.value + 0.5 * af.grad.trace() * bf.value;
            for (int c = 0; c < 2; ++c) {
                for (int i = 0; i < 6; ++i) {
                    out(space.velocity_dof(tri, i, c)) += l.weight * integrand(c) * l.phi[i];
                }
            }
        });
    }
    return out;
}

Vector assemble_load(const MixedSpace& space, const VectorField& f, double t)
{
    Vector out = Vector::Zero(space.n_u());
    for (int tri = 0; tri < space.n_elements(); ++tri) {
        const auto geom = space.geometry(tri);
        for_each_point(geom, assembly_quadrature(), [&](const QuadraturePoint& qp, const Local& l) {
            const Eigen::Vector2d x = geom.point(qp.barycentric);
            const Eigen::Vector2d fx = f(x.x(), x.y(), t);
            for (int c = 0; c < 2; ++c) {
                for (int i = 0; i < 6; ++i) {
                    out(space.velocity_dof(tri, i, c)) += l.weight * fx(c) * l.phi[i];
                }
            }
        });
    }
    return out;
}

Vector interpolate(const MixedSpace& space, const VectorField& f, double t)
{
    const int nn = space.n_nodes();
    Vector u(space.n_u());
    for (int k = 0; k < nn; ++k) {
        const Eigen::Vector2d x = space.node_point(k);
        const Eigen::Vector2d v = f(x.x(), x.y(), t);
        u(k) = v(0);
        u(nn + k) = v(1);
    }
    return u;
}

Vector interpolate(const MixedSpace& space, const ScalarField& f, double t)
{
    Vector p(space.n_p());
    for (int k = 0; k < space.n_p(); ++k) {
        const Eigen::Vector2d& x = space.mesh().vertices()[static_cast<std::size_t>(k)];
        p(k) = f(x.x(), x.y(), t);
    }
    return p;
}

void apply_dirichlet(const MixedSpace& space, const VectorField& g, double t, Vector& u)
{
    const int nn = space.n_nodes();
    const auto& mask = space.dirichlet_mask();
    for (int k = 0; k < nn; ++k) {
        if (!mask[static_cast<std::size_t>(k)]) {
            continue;
        }
        const Eigen::Vector2d x = space.node_point(k);
        const Eigen::Vector2d v = g(x.x(), x.y(), t);
        u(k) = v(0);
        u(nn + k) = v(1);
    }
}

ErrorNorms error_norms(const MixedSpace& space, const Vector& u_h, const Vector& p_h,
                       const ExactSolution& exact, double t)
{
    double eu = 0.0;
    double egrad = 0.0;
    double pdiff_int = 0.0;
    double pdiff_sq = 0.0;
    double area = 0.0;
    for (int tri = 0; tri < space.n_elements(); ++tri) {
        const auto geom = space.geometry(tri);
        const auto ul = gather(space, tri, u_h);
        const auto& verts = space.mesh().triangles()[static_cast<std::size_t>(tri)];
        for_each_point(geom, error_quadrature(), [&](const QuadraturePoint& qp, const Local& l) {
            const Eigen::Vector2d x = geom.point(qp.barycentric);
            const auto uf = evaluate(l, ul);
            eu += l.weight * (uf.value - exact.velocity(x.x(), x.y(), t)).squaredNorm();
            egrad += l.weight * (uf.grad - exact.velocity_gradient(x.x(), x.y(), t)).squaredNorm();
            double ph = 0.0;
            for (int a = 0; a < 3; ++a) {
                ph += qp.barycentric[a] * p_h(verts[a]);
            }
            const double d = ph - exact.pressure(x.x(), x.y(), t);
            pdiff_int += l.weight * d;
            pdiff_sq += l.weight * d * d;
            area += l.weight;
        });
    }
    // ||d - mean(d)||^2 = ||d||^2 - |Omega| mean(d)^2
    const double mean = pdiff_int / area;
    const double pvar = std::max(0.0, pdiff_sq - area * mean * mean);
    return {std::sqrt(eu), std::sqrt(egrad), std::sqrt(pvar)};
}

void write_vtk(const MixedSpace& space, const Vector& u, const Vector& p,
               const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write VTK file " + path.string());
    }
    const auto& mesh = space.mesh();
    const int nn = space.n_nodes();
    out << "# vtk DataFile Version 3.0\nbdfns velocity/pressure\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << std::setprecision(17);
    out << "POINTS " << mesh.vertices().size() << " double\n";
    for (const auto& v : mesh.vertices()) {
        out << v.x() << ' ' << v.y() << " 0\n";
    }
    const auto nt = mesh.triangles().size();
    out << "CELLS " << nt << ' ' << 4 * nt << '\n';
    for (const auto& t : mesh.triangles()) {
        out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    out << "CELL_TYPES " << nt << '\n';
    for (std::size_t i = 0; i < nt; ++i) {
        out << "5\n";
    }
    out << "POINT_DATA " << mesh.vertices().size() << '\n';
    out << "VECTORS velocity double\n";
    for (int k = 0; k < space.n_p(); ++k) {
        out << u(k) << ' ' << u(nn + k) << " 0\n";
    }
    out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (int k = 0; k < space.n_p(); ++k) {
        out << p(k) << '\n';
    }
}

} // namespace bdfns

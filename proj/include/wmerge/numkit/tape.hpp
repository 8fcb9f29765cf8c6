#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "wmerge/numkit/grid.hpp"

namespace wmerge::numkit::tape {

// Reverse-mode gradients over a closed op set (matmul, softmax, sigmoid,
// tanh, rms-norm, elementwise add/mul, row scaling, means, MSE). Nodes are
// recorded in creation order on a Graph; backward() walks that order in
// reverse. Every op's backward is verified by grad_check against central
// differences.

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Grid val;
    Grid grad;  // allocated lazily, same shape as val
    bool requires_grad = false;
    const char* op = "leaf";
    std::function<void(Node&)> back;  // pull this->grad into parents
    std::vector<Var> parents;

    void accumulate(const Grid& g) {
        if (grad.size() == 0) grad = Grid::Zero(val.rows(), val.cols());
        grad += g;
    }
};

class Graph {
public:
    Var leaf(Grid v, bool requires_grad = true) {
        auto n = std::make_shared<Node>();
        n->val = std::move(v);
        n->requires_grad = requires_grad;
        order_.push_back(n);
        return n;
    }

    Var constant(Grid v) { return leaf(std::move(v), false); }

    Var matmul(const Var& a, const Var& b) {
        auto n = make("matmul", {a, b}, numkit::matmul(a->val, b->val));
        n->back = [a, b](Node& self) {
            if (a->requires_grad) a->accumulate(self.grad * b->val.transpose());
            if (b->requires_grad) b->accumulate(a->val.transpose() * self.grad);
        };
        return n;
    }

    Var add(const Var& a, const Var& b) {
        check_same(a, b, "add");
        auto n = make("add", {a, b}, a->val + b->val);
        n->back = [a, b](Node& self) {
            if (a->requires_grad) a->accumulate(self.grad);
            if (b->requires_grad) b->accumulate(self.grad);
        };
        return n;
    }

    Var sub(const Var& a, const Var& b) {
        check_same(a, b, "sub");
        auto n = make("sub", {a, b}, a->val - b->val);
        n->back = [a, b](Node& self) {
            if (a->requires_grad) a->accumulate(self.grad);
            if (b->requires_grad) b->accumulate(-self.grad);
        };
        return n;
    }

    Var scale(const Var& a, double c) {
        auto n = make("scale", {a}, Grid(c * a->val));
        n->back = [a, c](Node& self) {
            if (a->requires_grad) a->accumulate(c * self.grad);
        };
        return n;
    }

    Var cmul(const Var& a, const Var& b) {
        check_same(a, b, "cmul");
        auto n = make("cmul", {a, b}, Grid(a->val.cwiseProduct(b->val)));
        n->back = [a, b](Node& self) {
            if (a->requires_grad) a->accumulate(self.grad.cwiseProduct(b->val));
            if (b->requires_grad) b->accumulate(self.grad.cwiseProduct(a->val));
        };
        return n;
    }

    Var transpose(const Var& a) {
        auto n = make("transpose", {a}, Grid(a->val.transpose()));
        n->back = [a](Node& self) {
            if (a->requires_grad) a->accumulate(self.grad.transpose());
        };
        return n;
    }

    Var softmax_rows(const Var& a, double scale) {
        auto n = make("softmax_rows", {a}, numkit::softmax_rows(a->val, scale));
        n->back = [a, scale](Node& self) {
            if (!a->requires_grad) return;
            Grid g(self.grad.rows(), self.grad.cols());
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                const double dot = self.grad.row(r).dot(self.val.row(r));
                g.row(r) = (self.grad.row(r).array() - dot) * self.val.row(r).array() / scale;
            }
            a->accumulate(g);
        };
        return n;
    }

    Var sigmoid(const Var& a) {
        auto n = make("sigmoid", {a}, numkit::sigmoid(a->val));
        n->back = [a](Node& self) {
            if (a->requires_grad)
                a->accumulate(self.grad.cwiseProduct(
                    (self.val.array() * (1.0 - self.val.array())).matrix()));
        };
        return n;
    }

    Var tanh(const Var& a) {
        auto n = make("tanh", {a}, Grid(a->val.array().tanh().matrix()));
        n->back = [a](Node& self) {
            if (a->requires_grad)
                a->accumulate(self.grad.cwiseProduct((1.0 - self.val.array().square()).matrix()));
        };
        return n;
    }

    // Per-row x / sqrt(mean(x^2) + eps). Parameter-free pre-normalization.
    Var rmsnorm_rows(const Var& a, double eps = 1e-6) {
        const Eigen::Index cols = a->val.cols();
        Grid out(a->val.rows(), cols);
        Vec inv_rms(a->val.rows());
        for (Eigen::Index r = 0; r < a->val.rows(); ++r) {
            const double ms = a->val.row(r).squaredNorm() / static_cast<double>(cols);
            inv_rms(r) = 1.0 / std::sqrt(ms + eps);
            out.row(r) = a->val.row(r) * inv_rms(r);
        }
        auto n = make("rmsnorm_rows", {a}, std::move(out));
        n->back = [a, inv_rms, cols](Node& self) {
            if (!a->requires_grad) return;
            Grid g(self.grad.rows(), self.grad.cols());
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                // dx = (g - y * (g.x) * inv_rms^2 / n) * inv_rms
                const double gx = self.grad.row(r).dot(a->val.row(r));
                g.row(r) = (self.grad.row(r) -
                            a->val.row(r) * (gx * inv_rms(r) * inv_rms(r) / static_cast<double>(cols))) *
                           inv_rms(r);
            }
            a->accumulate(g);
        };
        return n;
    }

    // Scale each row of z by the matching entry of column vector a (rows x 1).
    Var row_scale(const Var& z, const Var& a) {
        if (a->val.cols() != 1 || a->val.rows() != z->val.rows())
            throw ShapeError("row_scale: weights " + shape_str(a->val) + " vs features " +
                             shape_str(z->val));
        Grid out = z->val;
        for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) *= a->val(r, 0);
        auto n = make("row_scale", {z, a}, std::move(out));
        n->back = [z, a](Node& self) {
            if (z->requires_grad) {
                Grid g = self.grad;
                for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r) *= a->val(r, 0);
                z->accumulate(g);
            }
            if (a->requires_grad) {
                Grid g(a->val.rows(), 1);
                for (Eigen::Index r = 0; r < g.rows(); ++r)
                    g(r, 0) = self.grad.row(r).dot(z->val.row(r));
                a->accumulate(g);
            }
        };
        return n;
    }

    // Column-wise mean: (rows x cols) -> (1 x cols).
    Var col_mean(const Var& a) {
        const double inv = 1.0 / static_cast<double>(a->val.rows());
        auto n = make("col_mean", {a}, Grid(a->val.colwise().mean()));
        n->back = [a, inv](Node& self) {
            if (a->requires_grad)
                a->accumulate((Grid::Ones(a->val.rows(), 1) * self.grad) * inv);
        };
        return n;
    }

    // Mean of all entries -> 1x1.
    Var mean_all(const Var& a) {
        const double inv = 1.0 / static_cast<double>(a->val.size());
        Grid v(1, 1);
        v(0, 0) = a->val.mean();
        auto n = make("mean_all", {a}, std::move(v));
        n->back = [a, inv](Node& self) {
            if (a->requires_grad)
                a->accumulate(Grid::Constant(a->val.rows(), a->val.cols(), self.grad(0, 0) * inv));
        };
        return n;
    }

    // Elementwise division by a 1x1 scalar node.
    Var div_scalar(const Var& a, const Var& s) {
        if (s->val.size() != 1) throw ShapeError("div_scalar: divisor must be 1x1");
        const double sv = s->val(0, 0);
        auto n = make("div_scalar", {a, s}, Grid(a->val / sv));
        n->back = [a, s, sv](Node& self) {
            if (a->requires_grad) a->accumulate(self.grad / sv);
            if (s->requires_grad) {
                Grid g(1, 1);
                g(0, 0) = -self.grad.cwiseProduct(a->val).sum() / (sv * sv);
                s->accumulate(g);
            }
        };
        return n;
    }

    // Broadcast-add a 1x1 scalar node to every entry.
    Var add_scalar(const Var& a, const Var& s) {
        if (s->val.size() != 1) throw ShapeError("add_scalar: addend must be 1x1");
        auto n = make("add_scalar", {a, s}, Grid(a->val.array() + s->val(0, 0)));
        n->back = [a, s](Node& self) {
            if (a->requires_grad) a->accumulate(self.grad);
            if (s->requires_grad) {
                Grid g(1, 1);
                g(0, 0) = self.grad.sum();
                s->accumulate(g);
            }
        };
        return n;
    }

    // Broadcast-add a (1 x cols) row vector to every row.
    Var add_row(const Var& a, const Var& v) {
        if (v->val.rows() != 1 || v->val.cols() != a->val.cols())
            throw ShapeError("add_row: " + shape_str(a->val) + " vs " + shape_str(v->val));
        auto n = make("add_row", {a, v}, Grid(a->val.rowwise() + v->val.row(0)));
        n->back = [a, v](Node& self) {
            if (a->requires_grad) a->accumulate(self.grad);
            if (v->requires_grad) v->accumulate(self.grad.colwise().sum());
        };
        return n;
    }

    // Gather rows of an embedding table; backward scatter-adds.
    Var rows_select(const Var& table, std::vector<int> idx) {
        Grid out(static_cast<Eigen::Index>(idx.size()), table->val.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 0 || idx[i] >= table->val.rows())
                throw ArgumentError("rows_select: index out of range");
            out.row(static_cast<Eigen::Index>(i)) = table->val.row(idx[i]);
        }
        auto n = make("rows_select", {table}, std::move(out));
        n->back = [table, idx = std::move(idx)](Node& self) {
            if (!table->requires_grad) return;
            Grid g = Grid::Zero(table->val.rows(), table->val.cols());
            for (std::size_t i = 0; i < idx.size(); ++i)
                g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
            table->accumulate(g);
        };
        return n;
    }

    // Mean squared error over all entries -> 1x1.
    Var mse(const Var& a, const Var& b) {
        check_same(a, b, "mse");
        const double inv = 1.0 / static_cast<double>(a->val.size());
        Grid v(1, 1);
        v(0, 0) = (a->val - b->val).squaredNorm() * inv;
        auto n = make("mse", {a, b}, std::move(v));
        n->back = [a, b, inv](Node& self) {
            const Grid d = 2.0 * inv * self.grad(0, 0) * (a->val - b->val);
            if (a->requires_grad) a->accumulate(d);
            if (b->requires_grad) b->accumulate(-d);
        };
        return n;
    }

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
    void backward(const Var& loss) {
        if (loss->val.size() != 1) throw ArgumentError("backward: loss must be 1x1");
        loss->grad = Grid::Ones(1, 1);
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            Node& n = **it;
            if (!n.requires_grad || n.grad.size() == 0 || n.parents.empty()) continue;
            if (!n.back) throw CapabilityError(std::string("backward: op '") + n.op +
                                               "' has no gradient");
            n.back(n);
        }
    }

    std::size_t size() const { return order_.size(); }

private:
    Var make(const char* op, std::vector<Var> parents, Grid val) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->val = std::move(val);
        n->parents = std::move(parents);
        for (const auto& p : n->parents) n->requires_grad |= p->requires_grad;
        order_.push_back(n);
        return n;
    }

    static void check_same(const Var& a, const Var& b, const char* op) {
        if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols())
            throw ShapeError(std::string(op) + ": " + shape_str(a->val) + " vs " +
                             shape_str(b->val));
    }

    std::vector<Var> order_;
};

}  // namespace wmerge::numkit::tape

namespace wmerge::tape {
using numkit::tape::Graph;
using numkit::tape::Node;
using numkit::tape::Var;
}

#include "qdnw/nullform.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>

namespace qdnw {

QuadraticForm QuadraticForm::constant(const Mat& w, std::string label) {
    return QuadraticForm([w](const Vec&) { return w; }, std::move(label), true);
}

QuadraticForm QuadraticForm::zero(int n) {
    return constant(Mat::Zero(n, n), "0");
}

QuadraticForm QuadraticForm::metric(const MetricSpec& m) {
    if (m.kind() == MetricSpec::Kind::Minkowski) return constant(m.metric(Vec::Zero(m.dim())), "g");
    return QuadraticForm([m](const Vec& x) { return m.metric(x); }, "g", false);
}

namespace {

void check_index(int n, int a) {
    if (a < 0 || a >= n) throw Error(ErrorKind::InvalidArgument, "basis index out of range");
}

}  // namespace

QuadraticForm QuadraticForm::E(int n, int a, int b) {
    check_index(n, a);
    check_index(n, b);
    if (a == b) throw Error(ErrorKind::InvalidArgument, "E^{ab} needs a != b");
    Mat w = Mat::Zero(n, n);
    w(a, b) = 1.0;
    w(b, a) = -1.0;
    return constant(w, "E" + std::to_string(a) + std::to_string(b));
}

QuadraticForm QuadraticForm::F(int n, int a, int b) {
    check_index(n, a);
    check_index(n, b);
    if (a == b) throw Error(ErrorKind::InvalidArgument, "F^{ab} needs a != b");
    Mat w = Mat::Zero(n, n);
    w(a, b) = 1.0;
    w(b, a) = 1.0;
    return constant(w, "F" + std::to_string(a) + std::to_string(b));
}

QuadraticForm QuadraticForm::G(int n, int a) {
    check_index(n, a);
    Mat w = Mat::Zero(n, n);
    w(a, a) = 1.0;
    return constant(w, "G" + std::to_string(a));
}

QuadraticForm operator+(const QuadraticForm& a, const QuadraticForm& b) {
    if (a.constant_ && b.constant_) {
        const Vec probe;
        return QuadraticForm::constant(Mat(a.w_(probe) + b.w_(probe)), a.label_ + " + " + b.label_);
    }
    auto wa = a.w_, wb = b.w_;
    return QuadraticForm([wa, wb](const Vec& x) { return Mat(wa(x) + wb(x)); }, a.label_ + " + " + b.label_,
                         false);
}

QuadraticForm operator*(double c, const QuadraticForm& a) {
    std::ostringstream label;
    label << c << "*(" << a.label_ << ")";
    if (a.constant_) return QuadraticForm::constant(Mat(c * a.w_(Vec())), label.str());
    auto wa = a.w_;
    return QuadraticForm([wa, c](const Vec& x) { return Mat(c * wa(x)); }, label.str(), false);
}

double evaluate(const QuadraticForm& w, const MetricSpec&, const Point& x, const AnyVector& xi,
                const AnyVector& eta) {
    const auto* a = std::get_if<Vector>(&xi);
    const auto* b = std::get_if<Vector>(&eta);
    if (!a || !b) throw Error(ErrorKind::KindMismatch, "quadratic forms act on tangent vectors; raise covectors first");
    return a->c.dot(w.at(x) * b->c);
}

std::vector<Vector> sample_null_cone(const MetricSpec& m, const Point& x, int n, std::uint64_t seed) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "sample_null_cone needs n >= 1");
    const int d = m.space_dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(n));
    while (static_cast<int>(out.size()) < n) {
        Vec u(d);
        for (int a = 0; a < d; ++a) u[a] = normal(rng);
        const double norm = u.norm();
        if (norm < 1e-12) continue;
        out.push_back(future_null_vector(m, x, u / norm));
    }
    return out;
}

bool is_null_form(const QuadraticForm& w, const MetricSpec& m, const Point& x, int n_samples, std::uint64_t seed,
                  double tol_null) {
    const Mat W = w.at(x);
    double worst = 0.0;
    for (const auto& v : sample_null_cone(m, x, n_samples, seed)) {
        worst = std::max(worst, std::abs(v.c.dot(W * v.c)) / v.c.squaredNorm());
    }
    return worst <= tol_null;
}

Mat Decomposition::reconstruct(const MetricSpec& m) const {
    return Mat(C0 * m.metric(x) + a - a.transpose());
}

Decomposition decompose_null_form(const QuadraticForm& w, const MetricSpec& m, const Point& x, double tol_dec,
                                  std::optional<std::pair<int, int>> pivot) {
    const Mat W = w.at(x);
    const Mat g = m.metric(x);
    const int n = static_cast<int>(W.rows());
    // E coefficients a_ab, F coefficients b_ab, G coefficients c_a
    const Mat sym = 0.5 * (W + W.transpose());
    const Mat anti = 0.5 * (W - W.transpose());

    std::pair<int, int> p{-1, -1};
    if (pivot) {
        p = {std::min(pivot->first, pivot->second), std::max(pivot->first, pivot->second)};
        if (p.first < 0 || p.second >= n || g(p.first, p.second) == 0.0) {
            throw Error(ErrorKind::InvalidArgument, "requested pivot is not a nonzero coefficient of g");
        }
    } else {
        double best = 0.0;
        for (int a = 0; a < n; ++a) {
            for (int b = a; b < n; ++b) {
                if (std::abs(g(a, b)) > best) {
                    best = std::abs(g(a, b));
                    p = {a, b};
                }
            }
        }
        if (best == 0.0) throw Error(ErrorKind::PivotNotFound, "every symmetric coefficient of g vanishes");
    }

    Decomposition dec;
    dec.x = x;
    dec.pivot = p;
    dec.C0 = sym(p.first, p.second) / g(p.first, p.second);
    dec.a = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) dec.a(a, b) = anti(a, b);
    }

    const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
    int wa = 0, wb = 0;
    double worst = 0.0;
    for (int a = 0; a < n; ++a) {
        for (int b = a; b < n; ++b) {
            const double r = std::abs(sym(a, b) - dec.C0 * g(a, b));
            if (r > worst) {
                worst = r;
                wa = a;
                wb = b;
            }
        }
    }
    if (worst > tol_dec * scale) {
        std::ostringstream msg;
        msg << "symmetric residual " << worst << " at (" << wa << "," << wb << ") after removing "
            << dec.C0 << "*g";
        throw NotANullFormError(msg.str(), wa, wb, worst);
    }
    return dec;
}

NonlinearTerm NonlinearTerm::zero(int n) {
    return NonlinearTerm{QuadraticForm::zero(n), QuadraticForm::zero(n), QuadraticForm::zero(n), {}, {}};
}

AssumptionReport classify_nonlinearity(NonlinearTerm& nl, const MetricSpec& m, const std::vector<Point>& sample_points) {
    AssumptionReport rep;
    bool n0_all = true, n1_all = true, m_not_null_somewhere = false;
    for (const auto& x : sample_points) {
        PointVerdict pv;
        pv.x = x;
        std::ostringstream witness;
        try {
            pv.C0 = decompose_null_form(nl.N0, m, x).C0;
            pv.n0_null = true;
        } catch (const NotANullFormError& e) {
            witness << "N0 " << e.what() << "; ";
        }
        try {
            pv.C1 = decompose_null_form(nl.N1, m, x).C0;
            pv.n1_null = true;
        } catch (const NotANullFormError& e) {
            witness << "N1 " << e.what() << "; ";
        }
        pv.m_null = is_null_form(nl.M, m, x);
        n0_all = n0_all && pv.n0_null;
        n1_all = n1_all && pv.n1_null;
        m_not_null_somewhere = m_not_null_somewhere || !pv.m_null;
        pv.witness = witness.str();
        rep.points.push_back(std::move(pv));
    }
    rep.satisfied = !sample_points.empty() && n0_all && n1_all && m_not_null_somewhere;
    if (n0_all && n1_all && !sample_points.empty()) {
        const QuadraticForm n0 = nl.N0, n1 = nl.N1;
        nl.C0 = [n0, m](const Vec& x) { return decompose_null_form(n0, m, x).C0; };
        nl.C1 = [n1, m](const Vec& x) { return decompose_null_form(n1, m, x).C0; };
    }
    std::ostringstream sum;
    if (rep.satisfied) {
        sum << "assumption (A) satisfied at " << sample_points.size() << " points";
    } else {
        sum << "assumption (A) violated:";
        if (!n0_all) sum << " N0 is not null;";
        if (!n1_all) sum << " N1 is not null;";
        if (!m_not_null_somewhere) sum << " M is null at every sampled point;";
        for (const auto& pv : rep.points) {
            if (!pv.witness.empty()) {
                sum << " witness " << pv.witness;
                break;
            }
        }
    }
    rep.summary = sum.str();
    return rep;
}

namespace {

class FormParser {
public:
    FormParser(const std::string& text, const MetricSpec& m) : s_(text), m_(m), n_(m.dim()) {}

    QuadraticForm parse() {
        QuadraticForm acc = QuadraticForm::zero(n_);
        skip();
        if (pos_ == s_.size()) fail("empty form");
        bool first = true;
        while (pos_ < s_.size()) {
            double sign = 1.0;
            if (s_[pos_] == '+' || s_[pos_] == '-') {
                sign = s_[pos_] == '-' ? -1.0 : 1.0;
                ++pos_;
                skip();
            } else if (!first) {
                fail("expected '+' or '-'");
            }
            acc = acc + term(sign);
            first = false;
            skip();
        }
        return acc;
    }

private:
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorKind::ParseError, "form '" + s_ + "' column " + std::to_string(pos_ + 1) + ": " + what);
    }

    int digit() {
        if (pos_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_]))) fail("expected an index digit");
        const int v = s_[pos_++] - '0';
        if (v >= n_) fail("index exceeds the dimension");
        return v;
    }

    QuadraticForm term(double sign) {
        double coeff = 1.0;
        bool have_number = false;
        if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            coeff = std::strtod(begin, &end);
            pos_ += static_cast<std::size_t>(end - begin);
            have_number = true;
            skip();
            if (pos_ < s_.size() && s_[pos_] == '*') {
                ++pos_;
                skip();
            } else {
                if (coeff != 0.0) fail("a bare number must be 0");
                return QuadraticForm::zero(n_);
            }
        }
        if (pos_ >= s_.size()) fail(have_number ? "expected a basis symbol after '*'" : "expected a term");
        const char c = s_[pos_++];
        QuadraticForm atom;
        if (c == 'g') {
            atom = QuadraticForm::metric(m_);
        } else if (c == 'E' || c == 'F') {
            const int a = digit();
            const int b = digit();
            if (a == b) fail("repeated index");
            atom = c == 'E' ? QuadraticForm::E(n_, a, b) : QuadraticForm::F(n_, a, b);
        } else if (c == 'G') {
            atom = QuadraticForm::G(n_, digit());
        } else {
            --pos_;
            fail("unknown symbol");
        }
        return (sign * coeff) * atom;
    }

    std::string s_;
    const MetricSpec& m_;
    int n_;
    std::size_t pos_ = 0;
};

}  // namespace

QuadraticForm parse_form(const std::string& text, const MetricSpec& m) {
    const QuadraticForm q = FormParser(text, m).parse();
    return QuadraticForm([q](const Vec& x) { return q.at(x); }, text, q.is_constant());
}

}  // namespace qdnw

#include "fdist/analytic.hpp"

#include <array>
#include <cmath>

namespace fdist {

namespace {

constexpr int kQuadPoints = 16;

struct GaussLegendre {
    std::array<double, kQuadPoints> nodes{};    // on [0, 1]
    std::array<double, kQuadPoints> weights{};
};

// Newton iteration on P_n, mapped from [-1, 1] to [0, 1].
GaussLegendre make_gauss_legendre()
{
    GaussLegendre rule;
    const int n = kQuadPoints;
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = 0.5 * (1.0 - x);
        rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);  // 2/((1-x^2)P'^2) halved
    }
    return rule;
}

struct BumpRule {
    std::array<Complex, kQuadPoints * kQuadPoints> offsets{};
    std::array<double, kQuadPoints * kQuadPoints> weights{};
};

// Tensor rule for the normalized bump (3/pi)(1 - r^2)^2 on the unit disk.
const BumpRule& bump_rule()
{
    static const BumpRule rule = [] {
        const GaussLegendre gl = make_gauss_legendre();
        BumpRule out;
        double total = 0.0;
        for (int i = 0; i < kQuadPoints; ++i) {
            const double r = gl.nodes[i];
            const double radial = gl.weights[i] * (1.0 - r * r) * (1.0 - r * r) * r;
            for (int m = 0; m < kQuadPoints; ++m) {
                const double theta = 2.0 * kPi * (m + 0.5) / kQuadPoints;
                const int idx = i * kQuadPoints + m;
                out.offsets[idx] = std::polar(r, theta);
                out.weights[idx] = radial;
                total += radial;
            }
        }
        for (double& w : out.weights) w /= total;
        return out;
    }();
    return rule;
}

struct Evaluator {
    Complex z;

    Complex operator()(const AffineMap& m) const { return m.a * z + m.b * std::conj(z); }

    Complex operator()(const RadialStretch& m) const
    {
        const double r = std::abs(z);
        if (r == 0.0) return {0.0, 0.0};
        return z * std::pow(r, m.alpha - 1.0);
    }

    Complex operator()(const Oscillation& m) const
    {
        return z + m.amplitude * std::sin(2.0 * kPi * m.frequency * z.real());
    }

    Complex operator()(const CubicMap& m) const
    {
        const Complex zb = std::conj(z);
        return z + m.c * z * z * zb + m.d * z * zb * zb;
    }

    Complex operator()(const Mollified& m) const
    {
        if (!m.target) throw ConfigError("mollified map without target");
        if (m.radius == 0.0) return evaluate(*m.target, z);
        const BumpRule& rule = bump_rule();
        double re = 0.0, im = 0.0;
        for (std::size_t k = 0; k < rule.offsets.size(); ++k) {
            const Complex v = evaluate(*m.target, z - m.radius * rule.offsets[k]);
            re += rule.weights[k] * v.real();
            im += rule.weights[k] * v.imag();
        }
        return {re, im};
    }
};

Complex complex_from_json(const nlohmann::json& v)
{
    if (v.is_number()) return {v.get<double>(), 0.0};
    return {v.at(0).get<double>(), v.at(1).get<double>()};
}

} // namespace

Complex evaluate(const AnalyticMap& map, Complex z) { return std::visit(Evaluator{z}, map.form); }

std::string tag_of(const AnalyticMap& map)
{
    static constexpr const char* tags[] = {"affine", "radial_stretch", "oscillation", "cubic", "mollified"};
    return tags[map.form.index()];
}

AnalyticMap make_affine(Complex a, Complex b) { return {AffineMap{a, b}}; }

AnalyticMap make_radial_stretch(double alpha)
{
    if (!(alpha > 0.0)) throw ConfigError("radial stretch exponent must be positive");
    return {RadialStretch{alpha}};
}

AnalyticMap make_mollified(AnalyticMap target, double radius)
{
    if (!(radius >= 0.0)) throw ConfigError("mollification radius must be >= 0");
    return {Mollified{std::make_shared<const AnalyticMap>(std::move(target)), radius}};
}

nlohmann::json analytic_to_json(const AnalyticMap& map)
{
    nlohmann::json doc;
    doc["tag"] = tag_of(map);
    std::visit(
        [&doc](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, AffineMap>) {
                doc["a"] = {m.a.real(), m.a.imag()};
                doc["b"] = {m.b.real(), m.b.imag()};
            } else if constexpr (std::is_same_v<T, RadialStretch>) {
                doc["alpha"] = m.alpha;
            } else if constexpr (std::is_same_v<T, Oscillation>) {
                doc["frequency"] = m.frequency;
                doc["amplitude"] = m.amplitude;
            } else if constexpr (std::is_same_v<T, CubicMap>) {
                doc["c"] = m.c;
                doc["d"] = m.d;
            } else {
                doc["radius"] = m.radius;
                doc["target"] = analytic_to_json(*m.target);
            }
        },
        map.form);
    return doc;
}

AnalyticMap analytic_from_json(const nlohmann::json& doc)
{
    try {
        const std::string tag = doc.at("tag").get<std::string>();
        if (tag == "affine")
            return make_affine(complex_from_json(doc.value("a", nlohmann::json(1.0))),
                               complex_from_json(doc.value("b", nlohmann::json(0.0))));
        if (tag == "radial_stretch") return make_radial_stretch(doc.at("alpha").get<double>());
        if (tag == "oscillation")
            return {Oscillation{doc.at("frequency").get<double>(), doc.at("amplitude").get<double>()}};
        if (tag == "cubic") return {CubicMap{doc.value("c", 0.0), doc.value("d", 0.0)}};
        if (tag == "mollified")
            return make_mollified(analytic_from_json(doc.at("target")), doc.at("radius").get<double>());
        throw ConfigError("unknown analytic map tag '" + tag + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed analytic map: ") + e.what());
    }
}

} // namespace fdist

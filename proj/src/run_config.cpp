#include "hydrolimit/run_config.hpp"

#include <cmath>
#include <set>
#include <type_traits>

namespace hydrolimit::cli {

namespace {

using nlohmann::json;

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seeds are read as size_t");

/// Reads fields of one JSON object into a config and writes their resolved values
/// back out. With no input it only emits, which is how resolve() works.
class Binder {
public:
    Binder(const json* in, std::string path) : in_(in), path_(std::move(path)) {
        if (in_ && !in_->is_object()) fail("", "must be an object");
    }

    template <class T>
    void field(const char* key, T& value) {
        if (const json* v = find(key)) read(key, *v, value);
        out[key] = write(value);
    }

    template <class T>
    void required(const char* key, T& value) {
        if (emitting()) {
            out[key] = write(value);
            return;
        }
        if (!find(key)) fail(key, "is required");
        field(key, value);
    }

    template <class F>
    void child(const char* key, F&& bind) {
        const json* v = find(key);
        Binder sub(v, qualified(key));
        bind(sub);
        sub.finish();
        out[key] = std::move(sub.out);
    }

    void finish() const {
        if (!in_) return;
        for (const auto& item : in_->items())
            if (!seen_.count(item.key())) fail(item.key(), "is not a recognized key");
    }

    [[nodiscard]] bool emitting() const { return in_ == nullptr; }
    [[nodiscard]] bool has(const char* key) const { return in_ && in_->contains(key); }

    json out = json::object();

private:
    const json* find(const char* key) {
        seen_.insert(key);
        if (!in_) return nullptr;
        auto it = in_->find(key);
        return it == in_->end() ? nullptr : &*it;
    }

    [[nodiscard]] std::string qualified(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        const std::string where = key.empty() ? (path_.empty() ? "config" : path_) : qualified(key);
        throw ConfigError("config: " + where + " " + what);
    }

    void read(const char* key, const json& v, double& x) const {
        if (!v.is_number()) fail(key, "must be a number");
        x = v.get<double>();
        if (!std::isfinite(x)) fail(key, "must be finite");
    }
    void read(const char* key, const json& v, int& x) const {
        if (!v.is_number_integer()) fail(key, "must be an integer");
        x = v.get<int>();
    }
    void read(const char* key, const json& v, std::size_t& x) const {
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            fail(key, "must be a nonnegative integer");
        x = v.get<std::size_t>();
    }
    void read(const char* key, const json& v, bool& x) const {
        if (!v.is_boolean()) fail(key, "must be true or false");
        x = v.get<bool>();
    }
    void read(const char* key, const json& v, std::string& x) const {
        if (!v.is_string()) fail(key, "must be a string");
        x = v.get<std::string>();
    }
    void read(const char* key, const json& v, std::vector<double>& x) const {
        if (!v.is_array()) fail(key, "must be an array of numbers");
        x.clear();
        for (const auto& e : v) {
            if (!e.is_number()) fail(key, "must be an array of numbers");
            x.push_back(e.get<double>());
        }
    }
    void read(const char* key, const json& v, std::vector<Vec3>& x) const {
        if (!v.is_array()) fail(key, "must be an array of 3-vectors");
        x.clear();
        for (const auto& e : v) {
            if (!e.is_array() || e.size() != 3) fail(key, "must be an array of 3-vectors");
            Vec3 d;
            for (int i = 0; i < 3; ++i) {
                if (!e[i].is_number()) fail(key, "must be an array of 3-vectors");
                d(i) = e[i].get<double>();
            }
            if (d.norm() == 0.0) fail(key, "contains a zero direction");
            x.push_back(d);
        }
    }
    void read(const char* key, const json& v, std::vector<Wavevector>& x) const {
        if (!v.is_array()) fail(key, "must be an array of integer 3-vectors");
        x.clear();
        for (const auto& e : v) {
            if (!e.is_array() || e.size() != 3) fail(key, "must be an array of integer 3-vectors");
            Wavevector k;
            for (int i = 0; i < 3; ++i) {
                if (!e[i].is_number_integer()) fail(key, "must be an array of integer 3-vectors");
                k.k[i] = e[i].get<int>();
            }
            x.push_back(k);
        }
    }

    template <class T>
    static json write(const T& x) {
        return x;
    }
    static json write(const std::vector<Vec3>& x) {
        json a = json::array();
        for (const auto& d : x) a.push_back({d(0), d(1), d(2)});
        return a;
    }
    static json write(const std::vector<Wavevector>& x) {
        json a = json::array();
        for (const auto& k : x) a.push_back({k.k[0], k.k[1], k.k[2]});
        return a;
    }

    const json* in_;
    std::string path_;
    std::set<std::string> seen_;
};

void positive(const char* what, double x) {
    if (!(x > 0.0)) throw ConfigError(std::string("config: ") + what + " must be positive");
}

void grid(const char* section, int dim_x, int max_mode) {
    if (dim_x != 2 && dim_x != 3) throw ConfigError(std::string("config: ") + section + ".dim_x must be 2 or 3");
    if (max_mode < 1) throw ConfigError(std::string("config: ") + section + ".K must be positive");
}

void bind(Binder& b, RunConfig& c) {
    b.required("eps", c.xnorm.eps);
    b.required("alpha", c.xnorm.alpha);
    b.required("beta", c.xnorm.beta);
    b.required("ell", c.xnorm.ell);
    b.field("s", c.xnorm.vnorm.s);
    b.field("gamma", c.xnorm.vnorm.gamma);
    b.field("seed", c.seed);
    b.field("cache_dir", c.cache_dir);
    if (!b.emitting() && !b.has("backend")) throw ConfigError("config: backend is required");
    b.child("backend", [&](Binder& s) {
        auto& be = c.backend;
        s.required("kind", be.kind);
        s.field("nu", be.nu);
        s.field("max_degree", be.max_degree);
        s.field("angular_quad_order", be.angular_quad_order);
        s.field("synthetic_scale", be.synthetic_scale);
        s.field("synthetic_seed", be.synthetic_seed);
    });
    b.child("check", [&](Binder& s) {
        auto& x = c.check;
        s.field("dim_x", x.dim_x);
        s.field("K", x.max_mode);
        s.field("pairs", x.pairs);
        s.field("T", x.T);
        s.field("dt", x.dt);
        s.field("data_norm", x.data_norm);
        s.field("kernel_tol", x.kernel_tol);
        s.field("gamma_tol", x.gamma_tol);
        s.field("drift_tol", x.drift_tol);
    });
    b.child("scaling", [&](Binder& s) {
        auto& x = c.scaling;
        s.field("eps_list", x.eps_list);
        s.field("ks", x.ks);
        s.field("times", x.times);
        s.field("tol", x.tol);
    });
    b.child("spectrum", [&](Binder& s) {
        auto& x = c.spectrum;
        s.field("vanishing_radii", x.vanishing_radii);
        s.field("directions", x.directions);
        s.field("fit_radius_count", x.fit_radius_count);
        s.field("projector_tol", x.projector_tol);
        s.field("viscosity_tol", x.viscosity_tol);
        s.field("sound_tol", x.sound_tol);
    });
    b.child("sharp_decay", [&](Binder& s) {
        auto& x = c.sharp_decay;
        s.field("dim_x", x.dim_x);
        s.field("eps", x.eps);
        s.field("tol", x.tol);
    });
    b.child("nsf", [&](Binder& s) {
        auto& x = c.nsf;
        s.field("dim_x", x.dim_x);
        s.field("K", x.max_mode);
        s.field("data_norm", x.data_norm);
        s.field("data_max_k", x.data_max_k);
        s.field("T", x.T);
        s.field("dt_list", x.dt_list);
        s.field("tol", x.tol);
        s.field("min_order", x.min_order);
    });
    b.child("kinetic", [&](Binder& s) {
        auto& x = c.kinetic;
        s.field("dim_x", x.dim_x);
        s.field("K", x.max_mode);
        s.field("T", x.T);
        s.field("dt", x.dt);
        s.field("data_norm", x.data_norm);
        s.field("micro_norm", x.micro_norm);
        s.field("data_max_k", x.data_max_k);
        s.field("residual_tol", x.residual_tol);
    });
    b.child("limit", [&](Binder& s) {
        auto& x = c.limit;
        s.field("dim_x", x.dim_x);
        s.field("K", x.max_mode);
        s.field("data_norm", x.data_norm);
        s.field("data_max_k", x.data_max_k);
        s.field("mollifier_radius", x.mollifier_radius);
        s.field("T", x.T);
        s.field("dt", x.dt);
        s.field("nsf_substeps", x.nsf_substeps);
        s.field("eps_list", x.eps_list);
        s.field("micro_norm", c.limit_micro_norm);
        s.field("min_slope", c.limit_min_slope);
        s.field("plateau_floor", c.limit_plateau_floor);
        s.field("cross_check", c.limit_cross_check);
    });
    b.child("cross_check", [&](Binder& s) {
        auto& x = c.cross_check;
        s.field("dim_x", x.dim_x);
        s.field("K", x.max_mode);
        s.field("T", x.T);
        s.field("dt", x.dt);
        s.field("nsf_substeps", x.nsf_substeps);
        s.field("data_norm", x.data_norm);
        s.field("data_max_k", x.data_max_k);
        s.field("factor", c.cross_check_factor);
    });
    b.child("hypo", [&](Binder& s) {
        auto& x = c.hypo;
        s.field("eps_list", x.options.eps_list);
        s.field("dim_x", x.options.dim_x);
        s.field("k_radius", x.options.k_radius);
        s.field("samples", x.options.samples);
        s.field("tune", x.tune);
        s.field("max_c", x.max_c);
        s.child("deltas", [&](Binder& d) {
            d.field("d1", x.deltas.d1);
            d.field("d2", x.deltas.d2);
            d.field("d3", x.deltas.d3);
        });
    });
}

/// Copies the shared top-level parameters into every section.
void propagate(RunConfig& c) {
    const double eps = c.xnorm.eps;
    c.check.backend = c.scaling.backend = c.spectrum.backend = c.sharp_decay.backend = c.nsf.backend =
        c.kinetic.backend = c.hypo.backend = c.backend;
    c.check.eps = c.kinetic.eps = c.cross_check.eps = eps;
    c.check.seed = c.nsf.seed = c.kinetic.seed = c.limit.seed = c.cross_check.seed = c.hypo.options.seed = c.seed;
    c.check.cache_dir = c.kinetic.cache_dir = c.limit.cache_dir = c.cross_check.cache_dir = c.cache_dir;
    c.limit.alpha = c.xnorm.alpha;
    c.limit.vnorm = c.hypo.options.vnorm = c.xnorm.vnorm;
    c.limit.nu = c.cross_check.nu = c.backend.nu;
    c.limit.max_degree = c.cross_check.max_degree = c.backend.max_degree;
    c.cross_check.xnorm = c.xnorm;
}

void validate(const RunConfig& c) {
    c.xnorm.validate();
    if (c.xnorm.vnorm.gamma < 0.0) throw ConfigError("config: gamma must be nonnegative");
    c.backend.validate();
    grid("check", c.check.dim_x, c.check.max_mode);
    positive("check.T", c.check.T);
    positive("check.dt", c.check.dt);
    for (double e : c.scaling.eps_list)
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("config: scaling.eps_list values must lie in (0, 1]");
    if (c.spectrum.fit_radius_count < 6) throw ConfigError("config: spectrum.fit_radius_count must be at least 6");
    if (c.spectrum.directions.empty()) throw ConfigError("config: spectrum.directions is empty");
    if (!(c.sharp_decay.eps > 0.0 && c.sharp_decay.eps <= 1.0))
        throw ConfigError("config: sharp_decay.eps must lie in (0, 1]");
    grid("nsf", c.nsf.dim_x, c.nsf.max_mode);
    if (c.nsf.dt_list.size() < 2) throw ConfigError("config: nsf.dt_list needs at least two steps");
    for (double dt : c.nsf.dt_list) positive("nsf.dt_list values", dt);
    positive("nsf.T", c.nsf.T);
    grid("kinetic", c.kinetic.dim_x, c.kinetic.max_mode);
    positive("kinetic.T", c.kinetic.T);
    positive("kinetic.dt", c.kinetic.dt);
    if (c.kinetic.micro_norm < 0.0) throw ConfigError("config: kinetic.micro_norm must be nonnegative");
    c.limit.validate();
    if (!(c.limit_micro_norm > 0.0)) throw ConfigError("config: limit.micro_norm must be positive");
    grid("cross_check", c.cross_check.dim_x, c.cross_check.max_mode);
    positive("cross_check.T", c.cross_check.T);
    positive("cross_check.dt", c.cross_check.dt);
    if (!c.hypo.tune) c.hypo.deltas.validate();
    for (double e : c.hypo.options.eps_list)
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("config: hypo.eps_list values must lie in (0, 1]");
    if (c.hypo.options.dim_x != 2 && c.hypo.options.dim_x != 3)
        throw ConfigError("config: hypo.dim_x must be 2 or 3");
}

}  // namespace

RunConfig parse_config(const nlohmann::json& input, const Overrides& overrides) {
    const json* root = &input;
    if (input.is_object() && input.contains("config") && input.contains("tool")) root = &input.at("config");
    RunConfig c;
    Binder b(root, "");
    bind(b, c);
    b.finish();
    if (!overrides.eps.empty()) {
        c.xnorm.eps = overrides.eps.front();
        if (overrides.eps.size() > 1) c.limit.eps_list = overrides.eps;
    }
    if (overrides.seed) c.seed = *overrides.seed;
    propagate(c);
    validate(c);
    return c;
}

nlohmann::json resolve(const RunConfig& config) {
    RunConfig copy = config;
    Binder b(nullptr, "");
    bind(b, copy);
    return std::move(b.out);
}

experiments::Outcome run_subcommand(const std::string& name, const RunConfig& c) {
    using namespace experiments;
    Outcome out;
    if (name == "check") {
        out = conservation_and_kernel(c.check);
        SpectralConfig projectors = c.spectrum;
        projectors.fits = false;
        out.merge(spectral_structure(projectors));
        out.merge(scaling_identity(c.scaling));
        out.merge(picard_lemma(c.seed));
    } else if (name == "spectrum") {
        out = spectral_structure(c.spectrum);
        out.merge(sharp_decay(c.sharp_decay));
    } else if (name == "nsf") {
        out = fluid_duhamel(c.nsf);
    } else if (name == "kinetic") {
        out = kinetic_run(c.kinetic);
    } else if (name == "limit") {
        if (c.backend.kind != "bgk") throw ConfigError("config: limit runs only with the bgk backend");
        const auto compliant = analysis::convergence_sweep(c.limit);
        analysis::SweepConfig micro_cfg = c.limit;
        micro_cfg.micro_norm = c.limit_micro_norm;
        const auto micro = analysis::convergence_sweep(micro_cfg);
        out = convergence(compliant, c.limit_min_slope);
        out.merge(sensitivity(compliant, micro, c.limit_plateau_floor, c.limit_min_slope));
        if (c.limit_cross_check) out.merge(cross_check(c.cross_check, c.cross_check_factor));
    } else if (name == "hypo") {
        out = hypocoercivity(c.hypo);
    } else {
        throw ConfigError("unknown subcommand '" + name + "'");
    }
    return out;
}

}  // namespace hydrolimit::cli

#pragma once

// Implementations of the esp command-line subcommands. Each returns a process
// exit code; diagnostics go to `err`, machine-readable results to `out`.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "esp/esp.hpp"
#include "esp/io/image.hpp"
#include "esp/io/json.hpp"
#include "esp/io/raster.hpp"
#include "esp/io/trace.hpp"
#include "esp/synthetic.hpp"

namespace esp::cli {

/// Process exit codes; each error class has its own code.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,            ///< bad command line
    kInputError = 2,       ///< input file missing, unreadable or malformed
    kConfigError = 3,      ///< config file missing/malformed or invalid parameter values
    kNumericalError = 4,   ///< non-finite value inside the solver loop
    kEmptyMask = 5,        ///< nothing to fit (empty or degenerate mask)
    kDimensionMismatch = 6,
    kUndefinedMetric = 7,  ///< boundary metric undefined (empty boundary)
    kInvalidEllipse = 8,   ///< invalid ellipse parameters
    kOutputError = 9,      ///< output could not be written
};

struct SegmentOptions {
    std::string input;
    std::optional<std::string> config;
    std::string output = "esp_out";
    std::optional<std::size_t> max_iters;
    std::optional<double> tol;
    std::optional<double> lambda;
    std::optional<double> epsilon;
    std::optional<double> tau_q;
    std::optional<std::size_t> kernel_radius;
    std::optional<double> kernel_sigma;
    std::optional<std::size_t> ellipse_class;
    std::optional<std::size_t> layers;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> classes;
    std::optional<std::string> similarity;
    std::optional<std::string> tangent_scaling;
};

/// Everything a segment run needs after config file and flags are merged.
struct RunSettings {
    SolverConfig solver;
    std::optional<std::size_t> layers;
    std::uint64_t seed = 0;
    std::size_t classes = 2;
    std::string similarity = "variance";
    std::size_t kmeans_iters = 50;
};

namespace detail {

inline bool is_feature_raster(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    return ext == ".f32" || ext == ".raw";
}

inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "lambda", "epsilon", "tau_q", "max_iters", "tol", "kernel_radius", "kernel_sigma", "ellipse_class",
        "tangent_scaling", "layers", "seed", "classes", "similarity", "kmeans_iters"};
    return keys;
}

inline std::string snake(std::string k) {
    std::replace(k.begin(), k.end(), '-', '_');
    return k;
}

/// Merges config file (if any) and flag overrides; flags win.
inline RunSettings resolve_settings(const SegmentOptions& opt) {
    RunSettings s;
    if (opt.config) {
        if (!std::filesystem::exists(*opt.config)) throw InvalidArgument("config file not found: " + *opt.config);
        io::json j;
        try {
            j = io::read_json_file(*opt.config);
        } catch (const IoError& e) {
            throw InvalidArgument(e.what());
        }
        if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");
        for (const auto& [key, _] : j.items()) {
            const auto& keys = known_config_keys();
            if (std::find(keys.begin(), keys.end(), snake(key)) == keys.end()) {
                throw InvalidArgument("config: unknown key '" + key + "'");
            }
        }
        io::apply_solver_config(j, s.solver);
        auto count = [&](const char* key, auto& dst) {
            if (const io::json* v = io::find_key(j, key)) {
                if (!v->is_number_integer() || v->get<long long>() < 0) {
                    throw InvalidArgument(std::string("config: '") + key + "' must be a non-negative integer");
                }
                dst = v->get<std::remove_reference_t<decltype(dst)>>();
            }
        };
        std::size_t layers = 0;
        bool has_layers = io::find_key(j, "layers") != nullptr;
        count("layers", layers);
        if (has_layers) s.layers = layers;
        count("seed", s.seed);
        count("classes", s.classes);
        count("kmeans_iters", s.kmeans_iters);
        if (const io::json* v = io::find_key(j, "similarity")) {
            if (!v->is_string()) throw InvalidArgument("config: 'similarity' must be a string");
            s.similarity = v->get<std::string>();
        }
    }
    if (opt.max_iters) s.solver.max_iters = *opt.max_iters;
    if (opt.tol) s.solver.tol = *opt.tol;
    if (opt.lambda) s.solver.lambda = *opt.lambda;
    if (opt.epsilon) s.solver.epsilon = *opt.epsilon;
    if (opt.tau_q) s.solver.tau_q = *opt.tau_q;
    if (opt.kernel_radius) s.solver.kernel_radius = *opt.kernel_radius;
    if (opt.kernel_sigma) s.solver.kernel_sigma = *opt.kernel_sigma;
    if (opt.ellipse_class) s.solver.ellipse_class = *opt.ellipse_class;
    if (opt.tangent_scaling) s.solver.tangent_scaling = io::tangent_scaling_from_string(*opt.tangent_scaling);
    if (opt.layers) s.layers = *opt.layers;
    if (opt.seed) s.seed = *opt.seed;
    if (opt.classes) s.classes = *opt.classes;
    if (opt.similarity) s.similarity = *opt.similarity;

    if (s.similarity != "variance" && s.similarity != "mahalanobis") {
        throw InvalidArgument("similarity must be 'variance' or 'mahalanobis'");
    }
    if (s.classes < 2) throw InvalidArgument("classes must be >= 2");
    if (s.layers && *s.layers < 1) throw InvalidArgument("layers must be >= 1");
    s.solver.validate();
    return s;
}

/// Features from an image: k-means class statistics, clusters ordered by
/// decreasing mean intensity (class 0 is the brightest).
inline FeatureStack image_features(const Channels& image, const RunSettings& s) {
    const KMeansResult km = kmeans(image, s.classes, s.kmeans_iters, s.seed);
    std::vector<std::size_t> order(s.classes);
    std::iota(order.begin(), order.end(), 0);
    auto brightness = [&](std::size_t k) { return std::accumulate(km.means[k].begin(), km.means[k].end(), 0.0); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return brightness(a) > brightness(b); });
    std::vector<ChannelVector> means;
    std::vector<std::size_t> rank(s.classes);
    for (std::size_t i = 0; i < order.size(); ++i) {
        means.push_back(km.means[order[i]]);
        rank[order[i]] = i;
    }
    if (s.similarity == "variance") return variance_similarity(image, means);
    std::vector<std::size_t> labels(km.labels.size());
    for (std::size_t p = 0; p < labels.size(); ++p) labels[p] = rank[km.labels[p]];
    return mahalanobis_similarity(image, means, class_covariances(image, labels, means, 1e-4));
}

/// Draws the ellipse outline with 1024 parametric samples.
inline void draw_ellipse(io::Image8& img, const EllipseParams& e, std::uint8_t red, std::uint8_t green, std::uint8_t blue) {
    constexpr int kSamples = 1024;
    for (int k = 0; k < kSamples; ++k) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(k + 1) / kSamples;
        const auto [x, y] = point_at(e, t);
        const long c = std::lround(x), r = std::lround(y);
        if (r < 0 || c < 0 || r >= static_cast<long>(img.height) || c >= static_cast<long>(img.width)) continue;
        img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 0) = red;
        img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 1) = green;
        img.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 2) = blue;
    }
}

} // namespace detail

inline int cmd_segment(const SegmentOptions& opt, std::ostream& out, std::ostream& err) {
    RunSettings settings;
    try {
        settings = detail::resolve_settings(opt);
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    FeatureStack features;
    Channels image;
    try {
        if (detail::is_feature_raster(opt.input)) {
            features = io::read_feature_raster(opt.input);
        } else {
            image = io::load_image(opt.input);
            features = detail::image_features(image, settings);
        }
    } catch (const SingularMatrix& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const Error& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    }

    try {
        settings.solver.validate(features.classes());
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    SolverResult result;
    try {
        result = settings.layers ? run_unrolled(features, settings.solver, *settings.layers)
                                 : run(features, settings.solver);
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const Error& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    }

    const std::size_t ic = settings.solver.ellipse_class;
    const BinaryMask mask = BinaryMask::threshold(result.state.u[ic], 0.5);
    // The reported ellipse describes the segmented region; the solver's own
    // (soft-membership) ellipse goes to the manifest.
    EllipseParams reported = result.state.ellipse;
    bool from_mask = false;
    try {
        reported = fit_ellipse_moments(mask.to_field());
        from_mask = true;
    } catch (const DegenerateMass&) {
    }

    io::Image8 overlay = image.empty() ? io::to_rgb8({result.state.u[ic]}) : io::to_rgb8(image);
    detail::draw_ellipse(overlay, reported, 255, 0, 0);

    namespace fs = std::filesystem;
    const fs::path dir(opt.output);
    const std::vector<std::string> artifacts = {"mask.png", "overlay.png", "trace.csv", "ellipse.json"};
    try {
        fs::create_directories(dir);
        io::save_image((dir / "mask.png").string(), io::mask_to_image(mask));
        io::save_image((dir / "overlay.png").string(), overlay);
        io::write_trace_csv((dir / "trace.csv").string(), result.trace);
        io::write_json_file((dir / "ellipse.json").string(), io::to_json(reported));
        io::json manifest{{"input", opt.input},
                          {"config", opt.config ? io::json(*opt.config) : io::json(nullptr)},
                          {"output", opt.output},
                          {"artifacts", artifacts},
                          {"solver", io::to_json(settings.solver)},
                          {"mode", settings.layers ? "unrolled" : "iterative"},
                          {"iterations", result.trace.size()},
                          {"classes", features.classes()},
                          {"ellipse_source", from_mask ? "mask" : "solver"},
                          {"solver_ellipse", io::to_json(result.state.ellipse)}};
        if (settings.layers) manifest["layers"] = *settings.layers;
        io::write_json_file((dir / "manifest.json").string(), manifest);
    } catch (const std::exception& e) {
        err << "output error: " << e.what() << '\n';
        return kOutputError;
    }
    out << io::json{{"output", opt.output},
                    {"iterations", result.trace.size()},
                    {"foreground_pixels", mask.count()},
                    {"ellipse", io::to_json(reported)}}
               .dump()
        << '\n';
    return kOk;
}

inline int cmd_fit_ellipse(const std::string& mask_path, const std::optional<std::string>& output, std::ostream& out,
                           std::ostream& err) {
    BinaryMask mask;
    try {
        mask = io::load_mask(mask_path);
    } catch (const Error& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    }
    EllipseParams e;
    try {
        e = fit_ellipse_moments(mask.to_field());
    } catch (const DegenerateMass& ex) {
        err << "empty mask: " << ex.what() << '\n';
        return kEmptyMask;
    }
    const io::json j = io::to_json(e);
    if (output) {
        try {
            io::write_json_file(*output, j);
        } catch (const Error& ex) {
            err << "output error: " << ex.what() << '\n';
            return kOutputError;
        }
    }
    out << j.dump() << '\n';
    return kOk;
}

inline int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::optional<std::string>& output,
                    std::ostream& out, std::ostream& err) {
    BinaryMask pred, gt;
    try {
        pred = io::load_mask(pred_path);
        gt = io::load_mask(gt_path);
    } catch (const Error& e) {
        err << "input error: " << e.what() << '\n';
        return kInputError;
    }
    Metrics m;
    try {
        m = evaluate(pred, gt);
    } catch (const DimensionMismatch& e) {
        err << "dimension mismatch: " << e.what() << '\n';
        return kDimensionMismatch;
    } catch (const UndefinedMetric& e) {
        err << "undefined metric: " << e.what() << '\n';
        return kUndefinedMetric;
    }
    const io::json j = io::to_json(m);
    if (output) {
        try {
            io::write_json_file(*output, j);
        } catch (const Error& ex) {
            err << "output error: " << ex.what() << '\n';
            return kOutputError;
        }
    }
    out << j.dump() << '\n';
    return kOk;
}

inline int cmd_tangent_field(const std::string& ellipse_path, std::size_t height, std::size_t width,
                             const std::string& output, std::ostream& out, std::ostream& err) {
    EllipseParams e;
    try {
        e = io::ellipse_from_json(io::read_json_file(ellipse_path));
    } catch (const IoError& ex) {
        err << "input error: " << ex.what() << '\n';
        return kInputError;
    } catch (const Error& ex) {
        err << "invalid ellipse: " << ex.what() << '\n';
        return kInvalidEllipse;
    }
    if (height == 0 || width == 0) {
        err << "invalid dimensions: height and width must be positive\n";
        return kUsage;
    }
    try {
        io::write_tangent_raster(output, tangent_field(e, height, width));
    } catch (const Error& ex) {
        err << "output error: " << ex.what() << '\n';
        return kOutputError;
    }
    out << io::json{{"raster", output}, {"sidecar", io::sidecar_path(output)}}.dump() << '\n';
    return kOk;
}

inline int cmd_synth(const std::string& shape, std::size_t height, std::size_t width, const std::string& output,
                     const std::optional<std::string>& mask_output, std::ostream& out, std::ostream& err) {
    SyntheticShape s;
    try {
        s = synthetic_shape_from_string(shape);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return kUsage;
    }
    if (height == 0 || width == 0) {
        err << "invalid dimensions: height and width must be positive\n";
        return kUsage;
    }
    const ScalarField img = synthetic_image(s, height, width);
    try {
        io::save_image(output, io::to_gray8(img));
        if (mask_output) io::save_image(*mask_output, io::mask_to_image(BinaryMask::threshold(img, 0.5)));
    } catch (const Error& e) {
        err << "output error: " << e.what() << '\n';
        return kOutputError;
    }
    out << io::json{{"image", output}}.dump() << '\n';
    return kOk;
}

} // namespace esp::cli

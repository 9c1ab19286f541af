#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"

namespace {

constexpr const char* kExitCodes =
    "Exit codes: 0 ok, 1 usage, 2 input error, 3 config error, 4 numerical error (NaN abort),\n"
    "5 empty mask, 6 dimension mismatch, 7 undefined metric (empty boundary),\n"
    "8 invalid ellipse, 9 output error.";

} // namespace

int main(int argc, char** argv) {
    using namespace esp::cli;

    CLI::App app{"Image segmentation with an elliptical shape prior"};
    app.footer(kExitCodes);
    app.require_subcommand(1);

    SegmentOptions seg;
    auto* segment = app.add_subcommand("segment", "Run the shape-prior solver on an image or a feature raster");
    segment->add_option("input", seg.input, "Image (.png/.pgm/.ppm) or feature raster (.f32/.raw with .json sidecar)")
        ->required();
    segment->add_option("--config", seg.config, "JSON config; keys mirror the flags, flags override");
    segment->add_option("--output", seg.output, "Output directory")->capture_default_str();
    segment->add_option("--max-iters", seg.max_iters, "Maximum iterations (default 500)");
    segment->add_option("--tol", seg.tol, "Stop when RMS change of u falls below this (default 3e-5)");
    segment->add_option("--lambda", seg.lambda, "Regularization weight (default 1)");
    segment->add_option("--epsilon", seg.epsilon, "Entropy weight (default 1)");
    segment->add_option("--tau-q", seg.tau_q, "Dual step size (default 1)");
    segment->add_option("--kernel-radius", seg.kernel_radius, "Gaussian kernel radius in pixels (default 2)");
    segment->add_option("--kernel-sigma", seg.kernel_sigma, "Gaussian kernel sigma in pixels (default 5)");
    segment->add_option("--ellipse-class", seg.ellipse_class, "Index of the elliptical class (default 0)");
    segment->add_option("--layers", seg.layers, "Unrolled mode: exactly N layers, no convergence test");
    segment->add_option("--seed", seg.seed, "k-means seed (default 0)");
    segment->add_option("--classes", seg.classes, "Class count for image inputs (default 2)");
    segment->add_option("--similarity", seg.similarity, "variance (default) or mahalanobis");
    segment->add_option("--tangent-scaling", seg.tangent_scaling, "unit (default) or raw");

    std::string fit_mask;
    std::optional<std::string> fit_out;
    auto* fit = app.add_subcommand("fit-ellipse", "Moment-fit an ellipse to a 0/255 mask");
    fit->add_option("mask", fit_mask, "Mask image")->required();
    fit->add_option("--output", fit_out, "Also write the ellipse JSON here");

    std::string eval_pred, eval_gt;
    std::optional<std::string> eval_out;
    auto* eval = app.add_subcommand(
        "eval", "Dice, boundary distance (BD) and its standard deviation (BDSD) of a prediction.\n"
                "BD/BDSD are directed from the prediction's boundary to the ground truth's.\n"
                "Dice is 1 when both masks are empty; BD is undefined (exit 7) for an empty boundary.");
    eval->add_option("pred", eval_pred, "Predicted mask")->required();
    eval->add_option("gt", eval_gt, "Ground-truth mask")->required();
    eval->add_option("--output", eval_out, "Also write the metrics JSON here");

    std::string tf_ellipse, tf_output;
    std::size_t tf_height = 0, tf_width = 0;
    auto* tf = app.add_subcommand("tangent-field", "Dump the ellipse tangent field as a two-plane float32 raster");
    tf->add_option("ellipse", tf_ellipse, "Ellipse JSON {x0, y0, a, b, theta}")->required();
    tf->add_option("--height", tf_height, "Raster height")->required();
    tf->add_option("--width", tf_width, "Raster width")->required();
    tf->add_option("--output", tf_output, "Raster path; the sidecar is <path>.json")->required();

    std::string syn_shape = "peanut", syn_output;
    std::optional<std::string> syn_mask;
    std::size_t syn_height = 128, syn_width = 128;
    auto* syn = app.add_subcommand("synth", "Write a two-level synthetic test image");
    syn->add_option("--shape", syn_shape, "peanut, tab_square, cross or ellipse")->capture_default_str();
    syn->add_option("--height", syn_height)->capture_default_str();
    syn->add_option("--width", syn_width)->capture_default_str();
    syn->add_option("--output", syn_output, "Image path")->required();
    syn->add_option("--mask", syn_mask, "Also write the ground-truth mask");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    if (*segment) return cmd_segment(seg, std::cout, std::cerr);
    if (*fit) return cmd_fit_ellipse(fit_mask, fit_out, std::cout, std::cerr);
    if (*eval) return cmd_eval(eval_pred, eval_gt, eval_out, std::cout, std::cerr);
    if (*tf) return cmd_tangent_field(tf_ellipse, tf_height, tf_width, tf_output, std::cout, std::cerr);
    if (*syn) return cmd_synth(syn_shape, syn_height, syn_width, syn_output, syn_mask, std::cout, std::cerr);
    return kUsage;
}

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "osfuse/config.hpp"
#include "osfuse/datasetio.hpp"
#include "osfuse/errors.hpp"
#include "osfuse/evalkit.hpp"
#include "osfuse/filters.hpp"
#include "osfuse/scanorders.hpp"
#include "osfuse/ssmfusion.hpp"
#include "osfuse/svgplot.hpp"
#include "osfuse/synthetic.hpp"
#include "osfuse/toytrain.hpp"

namespace fs = std::filesystem;
using namespace osf;

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f.good()) throw InputError("cannot open for writing: " + path);
    f << text;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw InputError("cannot open: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

int cmd_filter(const std::string& kind, double alpha, const std::string& in,
               const std::string& out) {
    Image img = data::read_image(in);
    filters::FilterAugmentParams p{num::parameter(num::Tensor::scalar(alpha), "alpha")};
    Image aug = filters::filter_augment(img, filters::filter_kind_from_string(kind), p);
    for (double& v : aug.pix) v = std::clamp(v, 0.0, 1.0);
    data::write_image(out, aug);
    std::cout << "wrote " << out << " (" << aug.width << "x" << aug.height << ")\n";
    return 0;
}

int cmd_scan(const std::string& kind, std::size_t rows, std::size_t cols, int direction) {
    scan::ScanPermutation p =
        scan::scan_permutation(scan::scan_kind_from_string(kind), rows, cols, direction);
    for (std::size_t f : p.order)
        std::cout << "(" << f / cols << "," << f % cols << ")\n";
    return 0;
}

scan::FeatureMap image_to_grid(const Image& img, std::size_t patch) {
    const std::size_t rows = img.height / patch, cols = img.width / patch;
    if (rows == 0 || cols == 0) throw InputError("fuse: image smaller than one patch");
    scan::FeatureMap fm = scan::FeatureMap::zeros(rows, cols, 1, 3);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            double s = 0;
            for (std::size_t dy = 0; dy < patch; ++dy)
                for (std::size_t dx = 0; dx < patch; ++dx)
                    s += img.at(r * patch + dy, c * patch + dx);
            fm.at(r, c) = s / static_cast<double>(patch * patch);
        }
    return fm;
}

int cmd_fuse(const cli::RunConfig& rc, const std::string& in_a, const std::string& in_b,
             const std::string& out) {
    toy::ToyConfig tc = rc.to_toy();
    Image a = to_gray(data::read_image(in_a));
    Image b = to_gray(data::read_image(in_b));
    if (a.height != b.height || a.width != b.width)
        throw InputError("fuse: image sizes differ");

    filters::FilterAugmentParams pa{num::parameter(num::Tensor::scalar(rc.alpha_init), "alpha_a")};
    filters::FilterAugmentParams pb{num::parameter(num::Tensor::scalar(rc.alpha_init), "alpha_b")};
    Image fa = filters::filter_augment(a, tc.filter, pa);
    Image fb = filters::filter_augment(b, tc.filter, pb);

    const std::size_t patch = 8;
    scan::FeatureMap ga = image_to_grid(fa, patch);
    scan::FeatureMap gb = image_to_grid(fb, patch);

    SplitMix64 rng(rc.seed);
    SplitMix64 cr = rng.split("cmim");
    ssm::CMIMBlock block = ssm::CMIMBlock::init(tc.cmim, 1, cr, "cmim");
    auto [eo, es] = ssm::cmim_forward(ga, gb, block);
    for (std::size_t i = 0; i < eo.data.size(); ++i) {
        eo.data[i] += ga.data[i];
        es.data[i] += gb.data[i];
    }
    SplitMix64 ar = rng.split("afm");
    afm::AFMParams ap = afm::AFMParams::init(1, tc.area.head_dim, ar, "afm");
    scan::FeatureMap fused = afm::afm_fuse(eo, es, tc.area, ap);

    minmax01(fused.data);
    Image up = Image::zeros(a.height, a.width, 1);
    for (std::size_t y = 0; y < a.height; ++y)
        for (std::size_t x = 0; x < a.width; ++x)
            up.at(y, x) = fused.at(std::min(y / patch, fused.rows - 1),
                                   std::min(x / patch, fused.cols - 1));
    data::write_image(out, up);
    std::cout << "{\"grid\": [" << fused.rows << ", " << fused.cols << "], \"scan\": \""
              << scan::to_string(tc.cmim.kind) << "\", \"filter\": \""
              << filters::to_string(tc.filter) << "\", \"out\": \"" << out << "\"}\n";
    return 0;
}

int cmd_eval(const std::string& gt_dir, const std::string& det_file, bool table) {
    eval::GroundTruth gts;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(gt_dir))
        if (e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("eval: no .txt label files in " + gt_dir);
    for (const auto& f : files) {
        std::vector<eval::GtInstance> insts;
        for (const auto& inst : data::parse_label_file(read_text_file(f.string())))
            insts.push_back({inst.category, inst.box});
        gts[f.stem().string()] = std::move(insts);
    }
    std::vector<eval::Detection> dets = eval::read_detections(read_text_file(det_file));
    eval::EvalReport rep = eval::evaluate(dets, gts);
    if (table)
        std::cout << rep.to_table();
    else
        std::cout << rep.to_json();
    std::cerr << rep.to_table();
    return 0;
}

int cmd_stats(const std::string& label_dir, double image_size, const std::string& json_out) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(label_dir))
        if (e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("stats: no .txt label files in " + label_dir);
    std::vector<std::vector<data::LabeledInstance>> per_image;
    for (const auto& f : files) per_image.push_back(data::parse_label_file(read_text_file(f.string())));
    data::DatasetStats st = data::dataset_stats(per_image, image_size);
    std::cout << st.to_table();
    if (!json_out.empty()) {
        if (json_out == "-")
            std::cout << st.to_json();
        else
            write_text_file(json_out, st.to_json());
    }
    return 0;
}

int cmd_metrics(const std::string& in_a, const std::string& in_b) {
    data::PairMetrics m = data::pair_metrics(data::read_image(in_a), data::read_image(in_b));
    char buf[160];
    std::snprintf(buf, sizeof(buf), "{\"mse\": %.6f, \"ssim\": %.6f, \"mi\": %.6f}\n", m.mse,
                  m.ssim, m.mi);
    std::cout << buf;
    return 0;
}

int cmd_gen(const cli::RunConfig& rc, const std::string& out_dir, std::size_t pairs) {
    synth::SynthConfig sc;
    sc.pairs = pairs;
    sc.image_size = rc.image_size;
    sc.occlusion_rate = rc.occlusion_rate;
    sc.speckle = rc.speckle;
    sc.seed = rc.seed;
    fs::create_directories(out_dir);
    const auto data_pairs = synth::generate_synthetic_pairs(sc);
    std::ostringstream manifest;
    manifest << "{\n  \"seed\": " << sc.seed << ",\n  \"pairs\": " << sc.pairs
             << ",\n  \"image_size\": " << sc.image_size << ",\n  \"occlusion_rate\": "
             << sc.occlusion_rate << ",\n  \"speckle\": " << (sc.speckle ? "true" : "false")
             << ",\n  \"items\": [\n";
    for (std::size_t i = 0; i < data_pairs.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "pair_%04zu", i);
        const auto& p = data_pairs[i];
        data::write_image(out_dir + "/" + stem + "_a.pgm", p.a);
        data::write_image(out_dir + "/" + stem + "_b.pgm", p.b);
        write_text_file(out_dir + "/" + stem + ".txt", data::write_label_file(p.labels));
        char line[160];
        std::snprintf(line, sizeof(line),
                      "    {\"stem\": \"%s\", \"category\": %d, \"occluded_fraction\": %.6f}%s\n",
                      stem, p.category, p.occluded_fraction,
                      i + 1 < data_pairs.size() ? "," : "");
        manifest << line;
    }
    manifest << "  ]\n}\n";
    write_text_file(out_dir + "/manifest.json", manifest.str());
    std::cout << "wrote " << pairs << " pairs to " << out_dir << "\n";
    return 0;
}

std::string aggregate_json(const std::vector<toy::ExperimentReport>& reps) {
    double ma = 0, mb = 0, mf = 0, mm = 0;
    for (const auto& r : reps) {
        ma += r.a_only.accuracy;
        mb += r.b_only.accuracy;
        mf += r.fused.accuracy;
        mm += r.margin;
    }
    const double n = static_cast<double>(reps.size());
    std::ostringstream os;
    os << "{\n  \"runs\": [\n";
    for (std::size_t i = 0; i < reps.size(); ++i) {
        std::istringstream is(reps[i].to_json());
        std::string line, indented;
        while (std::getline(is, line)) indented += "    " + line + "\n";
        while (!indented.empty() && (indented.back() == '\n')) indented.pop_back();
        os << indented << (i + 1 < reps.size() ? "," : "") << "\n";
    }
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "  ],\n  \"mean\": {\"a_only\": %.6f, \"b_only\": %.6f, \"fused\": %.6f, "
                  "\"margin\": %.6f}\n}\n",
                  ma / n, mb / n, mf / n, mm / n);
    os << buf;
    return os.str();
}

int cmd_toytrain(cli::RunConfig rc, std::size_t seeds, bool control, const std::string& ablate,
                 const std::string& out_json, const std::string& svg_prefix) {
    if (control) {
        rc.occlusion_rate = 0.0;
        rc.speckle = false;
    }

    if (!ablate.empty()) {
        std::vector<std::pair<std::string, cli::RunConfig>> configs;
        if (ablate == "filters") {
            for (const char* f : {"wst", "canny", "haar", "hog", "grad"}) {
                cli::RunConfig c = rc;
                c.filter = f;
                configs.emplace_back(f, c);
            }
        } else if (ablate == "scans") {
            for (const char* k : {"bidirectional", "zorder", "zigzag", "hilbert"}) {
                cli::RunConfig c = rc;
                c.scan = k;
                configs.emplace_back(k, c);
            }
        } else {
            throw InputError("toytrain: --ablate must be `filters` or `scans`");
        }
        std::ostringstream table, json;
        json << "{\n  \"ablation\": \"" << ablate << "\",\n  \"rows\": [\n";
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-14s %8s %8s %8s %8s\n", ablate.c_str(), "a", "b",
                      "fused", "margin");
        table << buf;
        std::vector<std::string> labels;
        std::vector<double> fused_acc;
        for (std::size_t i = 0; i < configs.size(); ++i) {
            toy::ExperimentReport rep = toy::toy_fusion_experiment(configs[i].second.to_toy());
            std::snprintf(buf, sizeof(buf), "%-14s %7.1f%% %7.1f%% %7.1f%% %+7.1f\n",
                          configs[i].first.c_str(), 100 * rep.a_only.accuracy,
                          100 * rep.b_only.accuracy, 100 * rep.fused.accuracy, 100 * rep.margin);
            table << buf;
            std::snprintf(buf, sizeof(buf),
                          "    {\"kind\": \"%s\", \"a\": %.6f, \"b\": %.6f, \"fused\": %.6f, "
                          "\"margin\": %.6f}%s\n",
                          configs[i].first.c_str(), rep.a_only.accuracy, rep.b_only.accuracy,
                          rep.fused.accuracy, rep.margin, i + 1 < configs.size() ? "," : "");
            json << buf;
            labels.push_back(configs[i].first);
            fused_acc.push_back(100 * rep.fused.accuracy);
        }
        json << "  ]\n}\n";
        std::cout << json.str();
        std::cerr << table.str();
        if (!out_json.empty()) write_text_file(out_json, json.str());
        if (!svg_prefix.empty())
            write_text_file(svg_prefix + "_ablation.svg",
                            svg::bar_chart("fused accuracy by " + ablate, labels, fused_acc,
                                           "accuracy %"));
        return 0;
    }

    std::vector<toy::ExperimentReport> reps;
    for (std::size_t s = 0; s < seeds; ++s) {
        cli::RunConfig c = rc;
        c.seed = rc.seed + s;
        reps.push_back(toy::toy_fusion_experiment(c.to_toy()));
        std::cerr << reps.back().to_text() << "\n";
    }
    const std::string json = aggregate_json(reps);
    std::cout << json;
    if (!out_json.empty()) write_text_file(out_json, json);
    if (!svg_prefix.empty()) {
        std::vector<svg::Series> curves;
        for (const toy::ModelReport* m :
             {&reps[0].a_only, &reps[0].b_only, &reps[0].fused}) {
            svg::Series s;
            s.label = m->model;
            for (double a : m->epoch_accuracy) s.values.push_back(100 * a);
            curves.push_back(std::move(s));
        }
        write_text_file(svg_prefix + "_accuracy.svg",
                        svg::line_chart("held-out accuracy", curves, "epoch", "accuracy %"));
        double ma = 0, mb = 0, mf = 0;
        for (const auto& r : reps) {
            ma += r.a_only.accuracy;
            mb += r.b_only.accuracy;
            mf += r.fused.accuracy;
        }
        const double n = static_cast<double>(reps.size());
        write_text_file(svg_prefix + "_summary.svg",
                        svg::bar_chart("mean held-out accuracy", {"a_only", "b_only", "fused"},
                                       {100 * ma / n, 100 * mb / n, 100 * mf / n},
                                       "accuracy %"));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"optical/radar fusion toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override it)")
        ->check(CLI::ExistingFile);

    // filter
    auto* c_filter = app.add_subcommand("filter", "apply one handcrafted descriptor");
    std::string f_kind = "grad", f_in, f_out;
    double f_alpha = 1.0;
    c_filter->add_option("--kind", f_kind, "wst|canny|haar|hog|grad");
    c_filter->add_option("--alpha", f_alpha, "residual weight");
    c_filter->add_option("input", f_in)->required()->check(CLI::ExistingFile);
    c_filter->add_option("output", f_out)->required();

    // scan
    auto* c_scan = app.add_subcommand("scan", "print a scan order as (r,c) lines");
    std::string s_kind = "hilbert";
    std::size_t s_rows = 8, s_cols = 8;
    int s_dir = 0;
    c_scan->add_option("--kind", s_kind, "bidirectional|zorder|zigzag|hilbert");
    c_scan->add_option("--rows", s_rows)->required();
    c_scan->add_option("--cols", s_cols)->required();
    c_scan->add_option("--direction", s_dir, "hilbert direction 0..7");

    // fuse
    auto* c_fuse = app.add_subcommand("fuse", "run the fusion stack on an image pair");
    std::string fu_a, fu_b, fu_out = "fused.pgm";
    c_fuse->add_option("optical", fu_a)->required()->check(CLI::ExistingFile);
    c_fuse->add_option("radar", fu_b)->required()->check(CLI::ExistingFile);
    c_fuse->add_option("-o,--out", fu_out);

    // eval
    auto* c_eval = app.add_subcommand("eval", "rotated-box AP evaluation");
    std::string e_gt, e_det;
    bool e_table = false;
    c_eval->add_option("--gt", e_gt, "directory of per-image label files")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_eval->add_option("--det", e_det, "detection file")->required()->check(CLI::ExistingFile);
    c_eval->add_flag("--table", e_table, "print the text table to stdout instead of JSON");

    // stats
    auto* c_stats = app.add_subcommand("stats", "label-set statistics");
    std::string st_dir, st_json;
    double st_size = 512.0;
    c_stats->add_option("--labels", st_dir)->required()->check(CLI::ExistingDirectory);
    c_stats->add_option("--image-size", st_size, "pixels per image side");
    c_stats->add_option("--json", st_json, "JSON output path, or - for stdout");

    // metrics
    auto* c_metrics = app.add_subcommand("metrics", "cross-modal similarity of an image pair");
    std::string m_a, m_b;
    c_metrics->add_option("a", m_a)->required()->check(CLI::ExistingFile);
    c_metrics->add_option("b", m_b)->required()->check(CLI::ExistingFile);

    // gen
    auto* c_gen = app.add_subcommand("gen", "generate a synthetic paired dataset");
    std::string g_out;
    std::size_t g_pairs = 240;
    c_gen->add_option("--out", g_out)->required();
    c_gen->add_option("--pairs", g_pairs);

    // toytrain
    auto* c_toy = app.add_subcommand("toytrain", "fusion-vs-single toy experiment");
    std::size_t t_seeds = 1;
    bool t_control = false;
    std::string t_ablate, t_out, t_svg;
    c_toy->add_option("--seeds", t_seeds, "number of consecutive seeds to average");
    c_toy->add_flag("--control", t_control, "disable both corruptions");
    c_toy->add_option("--ablate", t_ablate, "filters|scans");
    c_toy->add_option("--out", t_out, "write the JSON report here");
    c_toy->add_option("--svg", t_svg, "SVG output path prefix");

    // shared config overrides
    cli::RunConfig rc;
    bool have_filter = false, have_scan = false;
    std::string o_filter, o_scan;
    std::uint64_t o_seed = 0;
    bool have_seed = false;
    std::size_t o_epochs = 0;
    double o_occl = -1.0;
    int o_speckle = -1;
    for (CLI::App* sub : {c_fuse, c_gen, c_toy}) {
        sub->add_option("--filter", o_filter)->each([&](const std::string&) { have_filter = true; });
        sub->add_option("--scan", o_scan)->each([&](const std::string&) { have_scan = true; });
        sub->add_option("--seed", o_seed)->each([&](const std::string&) { have_seed = true; });
        sub->add_option("--epochs", o_epochs);
        sub->add_option("--occlusion", o_occl, "mean occluded fraction of modality A");
        sub->add_flag("--no-speckle{0},--speckle{1}", o_speckle, "toggle modality-B speckle");
    }

    try {
        app.parse(argc, argv);

        if (!config_path.empty()) rc = cli::RunConfig::from_json_file(config_path);
        if (have_filter) rc.filter = o_filter;
        if (have_scan) rc.scan = o_scan;
        if (have_seed) rc.seed = o_seed;
        if (o_epochs > 0) rc.epochs = o_epochs;
        if (o_occl >= 0.0) rc.occlusion_rate = o_occl;
        if (o_speckle >= 0) rc.speckle = o_speckle != 0;

        if (c_filter->parsed()) return cmd_filter(f_kind, f_alpha, f_in, f_out);
        if (c_scan->parsed()) return cmd_scan(s_kind, s_rows, s_cols, s_dir);
        if (c_fuse->parsed()) return cmd_fuse(rc, fu_a, fu_b, fu_out);
        if (c_eval->parsed()) return cmd_eval(e_gt, e_det, e_table);
        if (c_stats->parsed()) return cmd_stats(st_dir, st_size, st_json);
        if (c_metrics->parsed()) return cmd_metrics(m_a, m_b);
        if (c_gen->parsed()) return cmd_gen(rc, g_out, g_pairs);
        if (c_toy->parsed()) return cmd_toytrain(rc, t_seeds, t_control, t_ablate, t_out, t_svg);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}

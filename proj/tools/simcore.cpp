// Command-line frontend: select / kmeans / synth / eval / sweep / baseline /
// dedup-check / inspect. Exit codes: 0 success, 1 runtime failure, 2 usage
// error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "simcore/embedding.hpp"
#include "simcore/kmeans.hpp"
#include "simcore/parallel.hpp"
#include "simcore/sampler.hpp"
#include "simcore/serialize.hpp"
#include "simcore/synth.hpp"

namespace {

using namespace simcore;

EmbeddingMatrix load_any(const std::string& path, const std::string& format) {
    if (format == "binary") return load_embeddings(path, EmbFormat::binary);
    if (format == "csv") return load_embeddings(path, EmbFormat::csv);
    return load_embeddings(path, detect_format(path));
}

struct CommonSelectFlags {
    std::string target_path;
    std::string open_path;
    std::string format = "auto";
    SamplerConfig cfg;
    std::string geometry = "spherical";
    bool strict_budget = false;
    bool exclude_final_round = false;
    bool exact_target = false;
};

void add_select_flags(CLI::App* sub, CommonSelectFlags& f) {
    sub->add_option("--target", f.target_path, "target embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--open-set", f.open_path, "open-set embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--format", f.format, "input format")
        ->check(CLI::IsMember({"auto", "binary", "csv"}))
        ->capture_default_str();
    sub->add_option("--k", f.cfg.k, "number of target centroids")->capture_default_str();
    static const CLI::Validator tau_range(
        [](std::string& s) -> std::string {
            double v = 0.0;
            try {
                v = std::stod(s);
            } catch (const std::exception&) {
                return "tau must be in (0,1]";
            }
            if (!(v > 0.0 && v <= 1.0)) return "tau must be in (0,1]";
            return {};
        },
        "FLOAT:(0,1]");
    sub->add_option("--tau", f.cfg.tau, "stopping threshold")
        ->check(tau_range)
        ->capture_default_str();
    sub->add_option("--budget", f.cfg.budget,
                    "maximum coreset size (0 = 50 x target count)")
        ->capture_default_str();
    sub->add_option("--seed", f.cfg.seed, "RNG seed")->capture_default_str();
    sub->add_flag("--strict-budget", f.strict_budget,
                  "truncate the final round to land exactly on the budget");
    sub->add_flag("--exclude-final-round", f.exclude_final_round,
                  "drop the below-threshold round from the coreset");
    sub->add_flag("--exact-target", f.exact_target,
                  "use every target row as a centroid (no clustering)");
    sub->add_option("--kmeans-geometry", f.geometry, "clustering geometry")
        ->check(CLI::IsMember({"spherical", "euclidean"}))
        ->capture_default_str();
    sub->add_option("--kmeans-max-iter", f.cfg.kmeans.max_iter, "k-means iteration cap")
        ->capture_default_str();
    sub->add_option("--kmeans-tol", f.cfg.kmeans.tol, "k-means relative inertia tolerance")
        ->capture_default_str();
    sub->add_option("--top-m", f.cfg.top_m, "ranked candidates kept per centroid")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--block-bytes", f.cfg.block_bytes,
                    "similarity block memory budget in bytes")
        ->capture_default_str();
}

SamplerConfig resolve(const CommonSelectFlags& f) {
    SamplerConfig cfg = f.cfg;
    cfg.strict_budget = f.strict_budget;
    cfg.include_final_round = !f.exclude_final_round;
    cfg.exact_target = f.exact_target;
    cfg.kmeans.geometry = kmeans_geometry_from_string(f.geometry);
    return cfg;
}

const LabelVector* try_load_relevance(const std::string& explicit_path,
                                      const std::string& open_path, LabelVector& storage) {
    if (!explicit_path.empty()) {
        storage = load_labels(explicit_path);
        return &storage;
    }
    if (detect_format(open_path) == EmbFormat::binary) {
        if (auto lv = load_embedded_labels(open_path)) {
            storage = std::move(*lv);
            return &storage;
        }
    }
    return nullptr;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"facility-location coreset selection over embedding files"};
    app.require_subcommand(1);
    app.fallthrough(true);  // global flags may follow the subcommand
    app.set_config("--config", "", "read defaults from a config file (TOML; subcommand "
                                   "options live in their [section])");

    int threads = 0;
    app.add_option("--threads", threads, "worker thread cap (0 = all cores)");

    // --- select ---------------------------------------------------------
    auto* select = app.add_subcommand("select", "run coreset selection");
    CommonSelectFlags sf;
    std::string select_out, select_report;
    bool quiet = false;
    add_select_flags(select, sf);
    select->add_option("--out", select_out, "output indices file")->required();
    select->add_option("--report", select_report, "output JSON report");
    select->add_flag("--quiet", quiet, "suppress per-round logging");

    // --- kmeans ---------------------------------------------------------
    auto* km = app.add_subcommand("kmeans", "cluster a target embedding file");
    std::string km_input, km_out, km_geometry = "spherical", km_format = "auto";
    std::size_t km_k = 100;
    std::uint64_t km_seed = 0;
    KmeansParams km_params;
    km->add_option("--input", km_input, "embedding file")->required()->check(CLI::ExistingFile);
    km->add_option("--out", km_out, "centroid EMB1 output (JSON sidecar beside it)")->required();
    km->add_option("--k", km_k, "number of centroids")->capture_default_str();
    km->add_option("--seed", km_seed, "RNG seed")->capture_default_str();
    km->add_option("--max-iter", km_params.max_iter, "iteration cap")->capture_default_str();
    km->add_option("--tol", km_params.tol, "relative inertia tolerance")->capture_default_str();
    km->add_option("--geometry", km_geometry, "clustering geometry")
        ->check(CLI::IsMember({"spherical", "euclidean"}))
        ->capture_default_str();
    km->add_option("--format", km_format, "input format")
        ->check(CLI::IsMember({"auto", "binary", "csv"}))
        ->capture_default_str();

    // --- synth ----------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic world");
    std::string synth_spec, synth_dir;
    synth->add_option("--spec", synth_spec, "world spec file")
        ->required()
        ->check(CLI::ExistingFile);
    synth->add_option("--out-dir", synth_dir, "output directory")->required();

    // --- eval -----------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "precision/recall of a selection");
    std::string eval_selected, eval_world, eval_out;
    eval->add_option("--selected", eval_selected, "indices file")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--world", eval_world, "open-set EMB1 file with relevance labels")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "write metrics JSON here too");

    // --- sweep ----------------------------------------------------------
    auto* sw = app.add_subcommand("sweep", "parameter sweep of selection runs");
    CommonSelectFlags swf;
    std::string sw_param, sw_csv, sw_json, sw_relevance;
    std::vector<double> sw_values;
    add_select_flags(sw, swf);
    sw->add_option("--param", sw_param, "swept parameter")
        ->required()
        ->check(CLI::IsMember({"tau", "k"}));
    sw->add_option("--values", sw_values, "comma-separated values")
        ->required()
        ->delimiter(',');
    sw->add_option("--out-csv", sw_csv, "sweep table CSV");
    sw->add_option("--out-json", sw_json, "sweep table JSON");
    sw->add_option("--relevance", sw_relevance,
                   "labels file for precision/recall (defaults to the open-set's "
                   "label block when present)");

    // --- baseline -------------------------------------------------------
    auto* base = app.add_subcommand("baseline", "random or label-oracle selection");
    std::string base_kind, base_open, base_labels, base_out;
    double base_fraction = 0.0;
    std::size_t base_count = 0;
    std::uint64_t base_seed = 0;
    std::vector<std::int64_t> base_classes;
    base->add_option("--kind", base_kind, "baseline sampler")
        ->required()
        ->check(CLI::IsMember({"random", "oracle"}));
    base->add_option("--open-set", base_open, "open-set file (for its row count)")
        ->check(CLI::ExistingFile);
    base->add_option("--count", base_count, "open-set row count (alternative to --open-set)");
    base->add_option("--fraction", base_fraction, "sampled fraction in (0,1]");
    base->add_option("--seed", base_seed, "RNG seed")->capture_default_str();
    base->add_option("--labels", base_labels, "label file for the oracle baseline")
        ->check(CLI::ExistingFile);
    base->add_option("--classes", base_classes, "oracle class ids")->delimiter(',');
    base->add_option("--out", base_out, "output indices file")->required();

    // --- dedup-check ------------------------------------------------------
    auto* dedup = app.add_subcommand("dedup-check",
                                     "report bitwise-identical rows across two files");
    std::string dd_target, dd_open, dd_out, dd_format = "auto";
    dedup->add_option("--target", dd_target, "left embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    dedup->add_option("--open-set", dd_open, "right embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    dedup->add_option("--out", dd_out, "write duplicate pairs here");
    dedup->add_option("--format", dd_format, "input format")
        ->check(CLI::IsMember({"auto", "binary", "csv"}));

    // --- inspect ----------------------------------------------------------
    auto* inspect = app.add_subcommand("inspect", "print a validation report");
    std::string in_input, in_format = "auto";
    inspect->add_option("--input", in_input, "embedding file")
        ->required()
        ->check(CLI::ExistingFile);
    inspect->add_option("--format", in_format, "input format")
        ->check(CLI::IsMember({"auto", "binary", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    set_thread_count(threads);

    try {
        if (app.got_subcommand(select)) {
            const SamplerConfig cfg = resolve(sf);
            const auto target = l2_normalize(load_any(sf.target_path, sf.format));
            const auto open = l2_normalize(load_any(sf.open_path, sf.format));
            RoundLogger logger;
            if (!quiet) {
                logger = [](const RoundResult& r) {
                    std::fprintf(stderr, "[select] round %zu: size=%zu value=%.6f ratio=%.6f\n",
                                 r.t, r.members.size(), r.value, r.ratio);
                };
            }
            const auto report = simcore_select(target, open, cfg, logger);
            write_indices(report.coreset, select_out);
            if (!select_report.empty()) write_json(report_to_json(report), select_report);
            if (!quiet) {
                std::fprintf(stderr,
                             "[select] stop=%s coreset=%zu/%zu ratio=%.4f rounds=%zu (%.1f ms)\n",
                             to_string(report.stop_reason), report.coreset.size(),
                             report.open_count, report.sampling_ratio, report.rounds.size(),
                             report.elapsed_ms);
            }
        } else if (app.got_subcommand(km)) {
            km_params.geometry = kmeans_geometry_from_string(km_geometry);
            const auto input = l2_normalize(load_any(km_input, km_format));
            const auto centroids = kmeans_fit(input, km_k, km_seed, km_params);
            save_centroids(centroids, km_out);
            std::fprintf(stderr, "[kmeans] k=%zu inertia=%.6f iterations=%zu -> %s\n",
                         centroids.k, centroids.inertia, centroids.iterations,
                         km_out.c_str());
        } else if (app.got_subcommand(synth)) {
            const auto spec = parse_world_spec(synth_spec);
            const auto world = generate_world(spec);
            std::filesystem::create_directories(synth_dir);
            const auto dir = std::filesystem::path(synth_dir);
            save_embeddings(world.target, LabelVector{world.target_cluster_ids},
                            (dir / "target.emb").string());
            save_embeddings(world.open, world.relevance, (dir / "open.emb").string());
            save_labels(LabelVector{world.open_cluster_ids},
                        (dir / "open_cluster_ids.txt").string());
            std::size_t relevant = 0;
            for (const auto v : world.relevance.labels) relevant += (v == 1);
            write_json(nlohmann::json{{"dim", spec.dim},
                                      {"seed", spec.seed},
                                      {"min_separation_deg", spec.min_separation_deg},
                                      {"target_count", world.target.count()},
                                      {"open_count", world.open.count()},
                                      {"relevant_count", relevant},
                                      {"target_clusters", spec.target_clusters.size()},
                                      {"relevant_clusters", spec.relevant_open_clusters.size()},
                                      {"distractor_clusters",
                                       spec.distractor_open_clusters.size()}},
                       (dir / "world.json").string());
            std::fprintf(stderr, "[synth] target=%zu open=%zu relevant=%zu -> %s\n",
                         world.target.count(), world.open.count(), relevant,
                         synth_dir.c_str());
        } else if (app.got_subcommand(eval)) {
            const auto selected = read_indices(eval_selected);
            const auto relevance = load_labels(eval_world);
            const auto metrics = precision_recall(selected, relevance);
            const auto j = metrics_to_json(metrics);
            std::cout << j.dump(2) << '\n';
            if (!eval_out.empty()) write_json(j, eval_out);
        } else if (app.got_subcommand(sw)) {
            const SamplerConfig cfg = resolve(swf);
            const auto target = l2_normalize(load_any(swf.target_path, swf.format));
            const auto open = l2_normalize(load_any(swf.open_path, swf.format));
            LabelVector storage;
            const LabelVector* relevance =
                try_load_relevance(sw_relevance, swf.open_path, storage);
            const auto param = sw_param == "tau" ? SweepParam::tau : SweepParam::k;
            const auto rows = sweep(target, open, cfg, param, sw_values, relevance);
            const auto csv = sweep_to_csv(sw_param, rows);
            std::cout << csv;
            if (!sw_csv.empty()) write_text(csv, sw_csv);
            if (!sw_json.empty()) write_json(sweep_to_json(sw_param, rows), sw_json);
        } else if (app.got_subcommand(base)) {
            BaselineSpec spec;
            std::size_t count = base_count;
            if (!base_open.empty()) count = read_emb_header(base_open).first;
            LabelVector labels;
            const LabelVector* labels_ptr = nullptr;
            if (base_kind == "random") {
                spec.kind = BaselineSpec::Kind::random_fraction;
                spec.fraction = base_fraction;
                if (count == 0) {
                    throw std::invalid_argument(
                        "random baseline needs --open-set or --count");
                }
            } else {
                spec.kind = BaselineSpec::Kind::label_oracle;
                spec.classes = base_classes;
                if (base_labels.empty()) {
                    throw std::invalid_argument("oracle baseline needs --labels");
                }
                labels = load_labels(base_labels);
                labels_ptr = &labels;
                if (count == 0) count = labels.count();
            }
            const auto indices = baseline_select(spec, count, labels_ptr, base_seed);
            write_indices(indices, base_out);
            std::fprintf(stderr, "[baseline] kind=%s selected=%zu/%zu -> %s\n",
                         base_kind.c_str(), indices.size(), count, base_out.c_str());
        } else if (app.got_subcommand(dedup)) {
            const auto left = load_any(dd_target, dd_format);
            const auto right = load_any(dd_open, dd_format);
            const auto dups = find_exact_duplicates(left, right);
            std::cout << "duplicates " << dups.size() << '\n';
            for (const auto& [l, r] : dups) std::cout << l << ' ' << r << '\n';
            if (!dd_out.empty()) {
                std::string text;
                for (const auto& [l, r] : dups) {
                    text += std::to_string(l) + " " + std::to_string(r) + "\n";
                }
                write_text(text, dd_out);
            }
        } else if (app.got_subcommand(inspect)) {
            const auto m = load_any(in_input, in_format);
            auto j = validation_to_json(validate(m));
            if (detect_format(in_input) == EmbFormat::binary) {
                j["has_labels"] = load_embedded_labels(in_input).has_value();
            }
            std::cout << j.dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

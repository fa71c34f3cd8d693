#include "attnroute/edit.hpp"
#include "attnroute/harness.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <sstream>

namespace ar = attnroute;

namespace {

// Variant names go into CSV, so commas and spaces become underscores.
std::string csv_safe(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        if (c == ',' || c == ' ') {
            c = '_';
        }
    }
    return out;
}

ar::RouterContext build_router(const std::string& table_path, const std::string& anchors_path,
                               const ar::EmbeddingProviders& providers) {
    ar::RouterContext router;
    router.table = ar::load_route_table(table_path);
    router.centroids = ar::build_centroids(ar::load_anchors(anchors_path), providers);
    router.providers = providers;
    return router;
}

void write_report(const std::vector<ar::VariantResult>& results, const ar::RunOptions& opts,
                  const std::string& out_path, const std::string& format_name) {
    const std::string report = ar::emit_report(ar::to_rows(results), opts.providers.id(),
                                               ar::parse_report_format(format_name));
    ar::write_file(out_path, report);
    std::cout << "wrote " << out_path << " (" << results.size() << " variants, "
              << results.front().cases.size() << " cases)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training-free attention-manipulation editing harness"};
    app.require_subcommand(1);

    const std::string default_cfg = ar::data_file("toy_model.cfg");
    const std::string default_table = ar::data_file("route_table.txt");
    const std::string default_anchors = ar::data_file("anchors.txt");

    // suite gen
    auto* suite_cmd = app.add_subcommand("suite", "synthetic edit-suite utilities");
    suite_cmd->require_subcommand(1);
    auto* gen_cmd = suite_cmd->add_subcommand("gen", "generate the stratified paired-seed suite");
    int gen_n = 17;
    uint64_t gen_seed = 42;
    std::string gen_out;
    gen_cmd->add_option("--n", gen_n, "cases per category (attribute/background get one fewer)")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen_seed, "master seed")->capture_default_str();
    gen_cmd->add_option("--out", gen_out, "output suite file")->required();

    // shared run options
    std::string suite_path, model_cfg = default_cfg, out_path, format_name = "csv";
    int workers = 1;
    bool captions = false, timing = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--suite", suite_path, "suite file")->required();
        cmd->add_option("--model-cfg", model_cfg, "model/sampler config file")
            ->capture_default_str();
        cmd->add_option("--out", out_path, "report output file")->required();
        cmd->add_option("--format", format_name, "report format: csv|json|text")
            ->capture_default_str();
        cmd->add_option("--workers", workers, "parallel case workers")->capture_default_str();
        cmd->add_flag("--captions", captions,
                      "use source labels as captions (enables the directional metric)");
        cmd->add_flag("--timing", timing, "record wall-clock per case (breaks byte-stability)");
    };

    // run
    auto* run_cmd = app.add_subcommand("run", "run one op over a suite");
    std::string op_text;
    run_cmd->add_option("--op", op_text, "op spec, e.g. kvinject:alpha=0.3,layers=frac:0.5-0.75,steps=0-28")
        ->required();
    add_common(run_cmd);

    // route
    auto* route_cmd = app.add_subcommand("route", "run the per-category router over a suite");
    std::string mode_name = "auto", table_path = default_table, anchors_path = default_anchors;
    route_cmd->add_option("--mode", mode_name, "oracle|auto")->capture_default_str();
    route_cmd->add_option("--table", table_path, "route table file")->capture_default_str();
    route_cmd->add_option("--anchors", anchors_path, "anchor sentence file")
        ->capture_default_str();
    add_common(route_cmd);

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "run a stock ablation grid");
    std::string axis_name;
    sweep_cmd->add_option("--axis", axis_name, "alpha|layers|steps|textscale|kvscale|main")
        ->required();
    sweep_cmd->add_option("--table", table_path, "route table file (router variants)")
        ->capture_default_str();
    sweep_cmd->add_option("--anchors", anchors_path, "anchor sentence file (router variants)")
        ->capture_default_str();
    add_common(sweep_cmd);

    // probe
    auto* probe_cmd = app.add_subcommand("probe", "dump noise/source K-similarity for one case");
    std::string probe_case, probe_suite;
    probe_cmd->add_option("--op", op_text, "op spec active during the probe")->required();
    probe_cmd->add_option("--case", probe_case, "case id, e.g. replace-000")->required();
    probe_cmd->add_option("--suite", probe_suite, "suite file (default: the stock suite)");
    probe_cmd->add_option("--model-cfg", model_cfg, "model/sampler config file")
        ->capture_default_str();
    probe_cmd->add_option("--out", out_path, "probe dump output file")->required();

    // report
    auto* report_cmd = app.add_subcommand("report", "re-emit a CSV report in another format");
    std::string in_path;
    report_cmd->add_option("--in", in_path, "input CSV report")->required();
    report_cmd->add_option("--format", format_name, "csv|json|text")->capture_default_str();
    report_cmd->add_option("--out", out_path, "output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen_cmd->parsed()) {
            auto cases = ar::generate_suite(gen_n, gen_seed);
            ar::save_suite(gen_out, cases);
            std::cout << "wrote " << cases.size() << " cases to " << gen_out << "\n";
            return 0;
        }

        ar::RunOptions opts;
        opts.workers = workers;
        opts.captions = captions;
        opts.timing = timing;

        if (run_cmd->parsed()) {
            const ar::HarnessConfig cfg = ar::load_config(model_cfg);
            const ar::OpSpec spec = ar::parse_op_spec(op_text);
            const ar::Model model(cfg.model);
            const auto suite = ar::load_suite(suite_path);
            auto result = ar::run_variant(csv_safe(op_text), ar::VariantSpec{spec}, suite, model,
                                          cfg.sample, opts);
            write_report({std::move(result)}, opts, out_path, format_name);
            return 0;
        }

        if (route_cmd->parsed()) {
            ar::RouteMode mode;
            if (mode_name == "oracle") {
                mode = ar::RouteMode::Oracle;
            } else if (mode_name == "auto") {
                mode = ar::RouteMode::Auto;
            } else {
                throw ar::SpecParseError("--mode must be 'oracle' or 'auto', got '" + mode_name +
                                         "'");
            }
            const ar::HarnessConfig cfg = ar::load_config(model_cfg);
            const ar::Model model(cfg.model);
            const auto suite = ar::load_suite(suite_path);
            const auto router = build_router(table_path, anchors_path, opts.providers);
            auto result = ar::run_variant("router_" + mode_name,
                                          ar::VariantSpec{ar::RoutedVariant{mode}}, suite, model,
                                          cfg.sample, opts, &router);
            write_report({std::move(result)}, opts, out_path, format_name);
            return 0;
        }

        if (sweep_cmd->parsed()) {
            const ar::SweepAxis axis = ar::parse_axis(axis_name);
            const ar::HarnessConfig cfg = ar::load_config(model_cfg);
            const ar::Model model(cfg.model);
            const auto suite = ar::load_suite(suite_path);
            const auto grid = ar::default_grid(axis, cfg.sample.steps);
            const auto router = build_router(table_path, anchors_path, opts.providers);
            auto results = ar::sweep(axis, grid, suite, model, cfg.sample, opts, &router);
            write_report(results, opts, out_path, format_name);
            return 0;
        }

        if (probe_cmd->parsed()) {
            const ar::HarnessConfig cfg = ar::load_config(model_cfg);
            const ar::OpSpec spec = ar::parse_op_spec(op_text);
            const ar::Model model(cfg.model);
            const auto suite =
                probe_suite.empty() ? ar::generate_suite(17, 42) : ar::load_suite(probe_suite);
            const ar::EditCase* found = nullptr;
            for (const auto& c : suite) {
                if (c.id == probe_case) {
                    found = &c;
                    break;
                }
            }
            if (!found) {
                throw ar::SpecParseError("no case '" + probe_case + "' in the suite");
            }
            auto probe = std::make_shared<ar::KProbeOp>(
                cfg.model.source_start(),
                ar::full_band(cfg.model.num_layers, cfg.sample.steps));
            ar::EditRunOptions edit_opts;
            edit_opts.extra_ops = {probe};
            ar::SampleConfig sc = cfg.sample;
            sc.seed = found->seed;
            const ar::LatentImage source =
                ar::encode_source(found->source_label, cfg.model, found->seed);
            ar::run_edit(model, source, found->instruction, spec, sc, edit_opts);
            std::ostringstream dump;
            probe->dump(dump);
            ar::write_file(out_path, dump.str());
            std::cout << "wrote " << probe->log().size() << " probe rows to " << out_path << "\n";
            return 0;
        }

        if (report_cmd->parsed()) {
            const ar::ParsedReport parsed = ar::parse_report_csv(ar::read_file(in_path));
            const std::string out = ar::emit_report(parsed.rows, parsed.provider_id,
                                                    ar::parse_report_format(format_name));
            if (out_path.empty()) {
                std::cout << out;
            } else {
                ar::write_file(out_path, out);
            }
            return 0;
        }

        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const ar::SpecParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

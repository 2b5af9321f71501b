// accsteer: command-line front end.
//
// Exit codes: 0 success, 1 validation/usage error, 2 data error, 3 internal.

#include "accsteer/cli.hpp"

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <iostream>

namespace {

using namespace accsteer;
using namespace accsteer::cli;

void add_split_options(CLI::App* sub, SplitSource& s) {
    sub->add_option("--split", s.split_file, "Split plan JSON (from `pairs`); built in-run when omitted");
    sub->add_option("--extraction-fraction", s.extraction_fraction, "Share of accent speakers used for extraction")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--split-pairs", s.split_pairs, "Extraction pairs kept in the split")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Accent-subspace analysis and activation steering"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1, 0);
    app.set_config("--config", "", "TOML/INI file; [subcommand] sections hold that command's options");
    app.option_defaults()->always_capture_default();

    Common common;
    app.add_option("--seed", common.seed, "Seed for every sampled choice");
    app.add_option("--workers", common.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--output-dir,-o", common.output_dir, "Output directory");

    // synth
    SynthParams synth;
    std::vector<std::size_t> inject{synth.config.planted_accent.inject_first, synth.config.planted_accent.inject_last};
    std::string nonlinearity = "none";
    fs::path synth_json;
    auto* s_synth = app.add_subcommand("synth", "Generate a synthetic dataset with a planted accent band");
    s_synth->configurable();
    s_synth->add_option("--from-json", synth_json, "Synthetic config JSON (flags below override it)");
    s_synth->add_option("--layers", synth.config.layer_count, "Encoder layers");
    s_synth->add_option("--hidden-dim", synth.config.hidden_dim, "Hidden width");
    s_synth->add_option("--projector-dim", synth.config.projector_dim, "Projector width");
    s_synth->add_option("--nonlinearity", nonlinearity, "none | saturating")
        ->check(CLI::IsMember({"none", "saturating"}));
    s_synth->add_option("--accents", synth.config.planted_accent.accent_labels, "Accent group labels")
        ->delimiter(',');
    s_synth->add_option("--standard-group", synth.config.standard_group, "Label of the reference group");
    s_synth->add_option("--inject-layers", inject, "First and last injection layer")->expected(2)->delimiter(',');
    s_synth->add_option("--shift-norm", synth.config.planted_accent.shift_norm, "Norm of the per-layer accent shift");
    s_synth->add_option("--speaker-noise", synth.config.planted_accent.speaker_noise_scale,
                        "Std-dev of per-speaker offsets");
    s_synth->add_option("--speakers", synth.config.planted_accent.num_speakers_per_group, "Speakers per group");
    s_synth->add_option("--utterances", synth.config.planted_accent.utterances_per_speaker, "Utterances per speaker");
    s_synth->add_option("--pool", synth.config.planted_accent.transcript_pool_size, "Transcript pool size");
    s_synth->add_option("--content-scale", synth.config.content_scale, "Scale of transcript content vectors");
    bool no_projector = false;
    s_synth->add_flag("--no-projector", no_projector, "Do not store projector outputs");
    s_synth->add_flag("--force", synth.force, "Replace a non-empty output directory");

    // pairs
    PairsParams pairs;
    std::vector<std::string> pairs_accents;
    auto* s_pairs = app.add_subcommand("pairs", "Build cross/within pairs and the extraction/evaluation split");
    s_pairs->configurable();
    s_pairs->add_option("--dataset", pairs.dataset, "Dataset root");
    s_pairs->add_option("--accents", pairs_accents, "Accent groups (default: all)")->delimiter(',');
    s_pairs->add_option("--cross-count", pairs.cross_count, "Cross pairs per accent")->check(CLI::PositiveNumber);
    s_pairs->add_option("--within-count", pairs.within_count, "Within pairs per accent")->check(CLI::PositiveNumber);
    s_pairs->add_option("--extraction-fraction", pairs.extraction_fraction, "Share of speakers used for extraction");
    s_pairs->add_option("--split-pairs", pairs.split_pairs, "Extraction pairs kept in the split")
        ->check(CLI::PositiveNumber);

    // analyze
    AnalyzeParams analyze;
    std::vector<std::string> analyze_accents;
    bool one_direction = false;
    auto* s_analyze = app.add_subcommand("analyze", "Layer-wise accent sensitivity profiles");
    s_analyze->configurable();
    s_analyze->add_option("--dataset", analyze.dataset, "Dataset root");
    s_analyze->add_option("--accents", analyze_accents, "Accent groups (default: all)")
        ->delimiter(',');
    s_analyze->add_option("--cross-count", analyze.cross_count, "Cross pairs per accent")->check(CLI::PositiveNumber);
    s_analyze->add_option("--within-count", analyze.within_count, "Within pairs per accent")
        ->check(CLI::PositiveNumber);
    s_analyze->add_option("--alpha", analyze.alpha, "Perturbation strength");
    s_analyze->add_flag("--one-direction", one_direction, "Only perturb the accented member of cross pairs");
    s_analyze->add_option("--exclude-layers", analyze.excluded_layers, "Layers left out (default: the last)")
        ->delimiter(',');

    // extract-vector
    ExtractParams extract;
    std::string extract_orientation = "accent_to_standard";
    auto* s_extract = app.add_subcommand("extract-vector", "Normalized steering vectors from the extraction split");
    s_extract->configurable();
    s_extract->add_option("--dataset", extract.dataset, "Dataset root");
    s_extract->add_option("--accent", extract.accent, "Accent group");
    add_split_options(s_extract, extract.split);
    s_extract->add_option("--layers", extract.layers, "Layers (default: all)")->delimiter(',');
    s_extract->add_option("--sample-count", extract.sample_count, "Extraction pairs sampled per vector")
        ->check(CLI::PositiveNumber);
    s_extract->add_option("--orientation", extract_orientation, "accent_to_standard | standard_to_accent")
        ->check(CLI::IsMember({"accent_to_standard", "standard_to_accent"}));

    // sweep
    SweepParams sweep;
    std::string sweep_orientation = "accent_to_standard";
    auto* s_sweep = app.add_subcommand(
        "sweep", "Single-layer steering sweep over layers x alphas. Tip: scan a coarse alpha grid first, then refine "
                 "around the best cell.");
    s_sweep->configurable();
    s_sweep->add_option("--dataset", sweep.dataset, "Dataset root");
    s_sweep->add_option("--accent", sweep.accent, "Accent group");
    add_split_options(s_sweep, sweep.split);
    s_sweep->add_option("--vectors", sweep.vectors_dir, "Directory of vectors from extract-vector");
    s_sweep->add_option("--layers", sweep.layers, "Layers (default: all)")->delimiter(',');
    s_sweep->add_option("--alphas", sweep.alphas, "Steering strengths")->delimiter(',');
    s_sweep->add_option("--sample-count", sweep.sample_count, "Extraction pairs sampled per vector")
        ->check(CLI::PositiveNumber);
    s_sweep->add_option("--per-bucket", sweep.per_bucket,
                        "Evaluation utterances per base-WER bucket (zero / positive); 0 keeps all");
    s_sweep->add_option("--orientation", sweep_orientation, "accent_to_standard | standard_to_accent")
        ->check(CLI::IsMember({"accent_to_standard", "standard_to_accent"}));
    s_sweep->add_option("--hypotheses", sweep.hypotheses, "Hypothesis CSV for precomputed datasets");

    // wer
    WerParams werp;
    auto* s_wer = app.add_subcommand("wer", "Word error rate of one pair of strings or of a hypothesis table");
    s_wer->configurable();
    s_wer->add_option("--reference", werp.reference, "Reference text");
    s_wer->add_option("--hypothesis", werp.hypothesis, "Hypothesis text");
    s_wer->add_option("--dataset", werp.dataset, "Dataset root");
    s_wer->add_option("--hypotheses", werp.hypotheses, "Hypothesis CSV (utterance_id,hypothesis)");

    // report
    ReportParams report;
    auto* s_report = app.add_subcommand("report", "Markdown/CSV report from sweep grids, profiles or a summary table");
    s_report->configurable();
    s_report->add_option("--grid", report.grids, "grid.json from sweep (repeatable)");
    s_report->add_option("--profile", report.profiles, "profile_*.json from analyze (repeatable)");
    s_report->add_option("--table", report.table, "CSV accent,base,steered[,delta] in percent");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    // A config file with several sections activates several subcommands; the
    // one named on the command line is parsed first.
    const auto parsed = app.get_subcommands();
    const CLI::App* chosen = parsed.empty() ? nullptr : parsed.front();

    try {
        std::string out;
        if (chosen == s_synth) {
            if (!synth_json.empty()) {
                // JSON gives the base; explicitly passed flags win.
                auto base = load_synthetic_config(synth_json);
                auto& pa = base.planted_accent;
                const auto& given = synth.config;
                auto set = [&](const char* flag, auto& dst, const auto& src) {
                    if (s_synth->count(flag) > 0)
                        dst = src;
                };
                set("--layers", base.layer_count, given.layer_count);
                set("--hidden-dim", base.hidden_dim, given.hidden_dim);
                set("--projector-dim", base.projector_dim, given.projector_dim);
                set("--accents", pa.accent_labels, given.planted_accent.accent_labels);
                set("--standard-group", base.standard_group, given.standard_group);
                set("--shift-norm", pa.shift_norm, given.planted_accent.shift_norm);
                set("--speaker-noise", pa.speaker_noise_scale, given.planted_accent.speaker_noise_scale);
                set("--speakers", pa.num_speakers_per_group, given.planted_accent.num_speakers_per_group);
                set("--utterances", pa.utterances_per_speaker, given.planted_accent.utterances_per_speaker);
                set("--pool", pa.transcript_pool_size, given.planted_accent.transcript_pool_size);
                set("--content-scale", base.content_scale, given.content_scale);
                if (no_projector)
                    base.store_projector = false;
                if (s_synth->count("--nonlinearity") > 0)
                    base.nonlinearity = nonlinearity_from_string(nonlinearity);
                if (s_synth->count("--inject-layers") > 0) {
                    pa.inject_first = inject.at(0);
                    pa.inject_last = inject.at(1);
                }
                if (app.count("--seed") == 0)
                    common.seed = base.seed;
                synth.config = std::move(base);
            } else {
                synth.config.nonlinearity = nonlinearity_from_string(nonlinearity);
                synth.config.store_projector = !no_projector;
                synth.config.planted_accent.inject_first = inject.at(0);
                synth.config.planted_accent.inject_last = inject.at(1);
            }
            out = cmd_synth(common, synth);
        } else if (chosen == s_pairs) {
            if (s_pairs->count("--accents") > 0)
                pairs.accents = pairs_accents;
            out = cmd_pairs(common, pairs);
        } else if (chosen == s_analyze) {
            if (s_analyze->count("--accents") > 0)
                analyze.accents = analyze_accents;
            analyze.bidirectional = !one_direction;
            out = cmd_analyze(common, analyze);
        } else if (chosen == s_extract) {
            extract.orientation = orientation_from_string(extract_orientation);
            out = cmd_extract_vector(common, extract);
        } else if (chosen == s_sweep) {
            sweep.orientation = orientation_from_string(sweep_orientation);
            out = cmd_sweep(common, sweep);
        } else if (chosen == s_wer) {
            out = cmd_wer(common, werp);
        } else if (chosen == s_report) {
            out = cmd_report(common, report);
        }
        std::cout << out;
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return exit_code_for(ex);
    }
}

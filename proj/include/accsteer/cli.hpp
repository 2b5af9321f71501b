#ifndef ACCSTEER_CLI_HPP
#define ACCSTEER_CLI_HPP

// Command implementations behind the accsteer tool. Each command takes a
// fully resolved parameter struct, writes its outputs plus run.json into the
// output directory, and returns a short human-readable summary.

#include "accsteer/accsteer.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace accsteer::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct Common {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    fs::path output_dir = "out";
};

inline int exit_code_for(const std::exception& ex) {
    if (const auto* e = dynamic_cast<const Error*>(&ex)) {
        switch (e->error_class()) {
        case ErrorClass::validation:
            return 1;
        case ErrorClass::data:
            return 2;
        case ErrorClass::internal:
            return 3;
        }
    }
    return 3;
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    accsteer::detail::write_atomically(path, std::as_bytes(std::span(text.data(), text.size())));
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& ex) {
        throw FormatError(path.string() + ": " + ex.what());
    }
}

inline std::string file_hash(const fs::path& path) {
    Fnv1a h;
    h.update(accsteer::detail::slurp(path));
    return hex64(h.digest());
}

inline void require_dataset(const fs::path& root) {
    if (root.empty())
        throw ValidationError("--dataset is required");
    if (!fs::is_directory(root))
        throw ValidationError("dataset directory " + root.string() + " does not exist");
}

inline void prepare_output(const fs::path& dir) {
    if (dir.empty())
        throw ValidationError("output directory must be set");
    fs::create_directories(dir);
}

inline json run_manifest(const std::string& command, const Common& common, json params, json inputs) {
    return {{"command", command},
            {"tool_version", kToolVersion},
            {"seed", common.seed},
            {"workers", common.workers},
            {"output_dir", common.output_dir.generic_string()},
            {"params", std::move(params)},
            {"inputs", std::move(inputs)}};
}

inline std::vector<std::string> resolve_accents(const DatasetManifest& m,
                                                const std::optional<std::vector<std::string>>& selection) {
    std::vector<std::string> accents = selection ? *selection : m.accent_groups();
    if (accents.empty())
        throw ValidationError("no accent selected");
    for (const auto& a : accents)
        if (!m.has_group(a) || a == m.standard_group)
            throw ValidationError("unknown accent group '" + a + "'");
    return accents;
}

/// Synthetic transcriber when the dataset was generated here, otherwise the
/// offline hypothesis table.
inline std::unique_ptr<Transcriber> make_transcriber(const ActivationStore& store, const fs::path& hypotheses) {
    const fs::path cfg = store.root() / kSyntheticConfigFileName;
    if (fs::exists(cfg))
        return std::make_unique<SyntheticTranscriber>(SyntheticWorld(load_synthetic_config(cfg)));
    if (!hypotheses.empty())
        return std::make_unique<HypothesisTable>(HypothesisTable::load(hypotheses));
    throw ValidationError("dataset has no synthetic config; pass --hypotheses for precomputed activations");
}

inline std::string layer_list(const std::vector<std::size_t>& layers) {
    std::ostringstream os;
    for (std::size_t i = 0; i < layers.size(); ++i)
        os << (i ? "," : "") << layers[i];
    return os.str();
}

inline std::string vector_file_name(const std::string& accent, std::size_t layer) {
    return accsteer::detail::file_stem_for(accent) + "_L" + std::to_string(layer) + ".strv";
}

} // namespace detail

// ---------------------------------------------------------------------------
// synth

struct SynthParams {
    SyntheticConfig config;
    bool force = false;
};

inline std::string cmd_synth(const Common& common, SynthParams p) {
    p.config.seed = common.seed;
    p.config.validate();
    const fs::path root = common.output_dir;
    if (fs::exists(root) && !fs::is_empty(root)) {
        if (!p.force)
            throw ValidationError("output directory " + root.string() + " is not empty (use --force to replace it)");
        fs::remove_all(root);
    }
    const auto manifest = generate_synthetic_dataset(p.config, root);
    detail::write_json(root / "run.json",
                       detail::run_manifest("synth", common, {{"synthetic", to_json(p.config)}, {"force", p.force}},
                                            json::object()));

    std::ostringstream os;
    os << "wrote " << manifest.records.size() << " utterances to " << root.string() << '\n';
    for (const auto& g : manifest.groups)
        os << "  " << g << ": " << manifest.speakers(g).size() << " speakers, " << manifest.in_group(g).size()
           << " utterances\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// pairs

struct PairsParams {
    fs::path dataset;
    std::optional<std::vector<std::string>> accents;
    std::size_t cross_count = 1000;
    std::size_t within_count = 500;
    double extraction_fraction = 0.8;
    std::size_t split_pairs = 1000;
};

inline std::string cmd_pairs(const Common& common, const PairsParams& p) {
    detail::require_dataset(p.dataset);
    const auto manifest = read_manifest(p.dataset);
    const auto accents = detail::resolve_accents(manifest, p.accents);
    detail::prepare_output(common.output_dir);

    std::ostringstream os;
    json outputs = json::array();
    for (const auto& accent : accents) {
        const auto cross = build_cross_pairs(manifest, accent, p.cross_count, common.seed);
        const auto within = build_within_pairs(manifest, accent, p.within_count, common.seed);
        const auto split = make_split(manifest, accent, p.extraction_fraction, common.seed, p.split_pairs);
        const std::string stem = accsteer::detail::file_stem_for(accent);
        detail::write_json(common.output_dir / ("pairs_" + stem + ".json"),
                           {{"accent", accent}, {"cross", to_json(cross)}, {"within", to_json(within)}});
        detail::write_json(common.output_dir / ("split_" + stem + ".json"), to_json(split));
        outputs.push_back(accent);
        os << accent << ": " << cross.pairs.size() << " cross (of " << cross.available << "), " << within.pairs.size()
           << " within (of " << within.available << "); split " << split.extraction_speakers.size() << "/"
           << split.evaluation_speakers.size() << " speakers, " << split.extraction_pairs.size()
           << " extraction pairs, " << split.evaluation_utterances.size() << " evaluation utterances ("
           << split.dropped_for_overlap << " dropped for transcript overlap)\n";
    }
    detail::write_json(common.output_dir / "run.json",
                       detail::run_manifest("pairs", common,
                                            {{"dataset", p.dataset.generic_string()},
                                             {"accents", accents},
                                             {"cross_count", p.cross_count},
                                             {"within_count", p.within_count},
                                             {"extraction_fraction", p.extraction_fraction},
                                             {"split_pairs", p.split_pairs}},
                                            {{"dataset", hex64(dataset_hash(manifest, p.dataset))}}));
    return os.str();
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeParams {
    fs::path dataset;
    std::optional<std::vector<std::string>> accents;
    std::size_t cross_count = 1000;
    std::size_t within_count = 500;
    double alpha = 1.0;
    bool bidirectional = true;
    std::vector<std::size_t> excluded_layers; // empty = last layer
};

struct AnalyzeResult {
    std::vector<SensitivityProfile> profiles;
    std::string summary;
};

inline AnalyzeResult run_analyze(const Common& common, const AnalyzeParams& p) {
    detail::require_dataset(p.dataset);
    const ActivationStore store(p.dataset);
    const auto accents = detail::resolve_accents(store.manifest(), p.accents);
    const auto encoder = load_encoder(store);
    detail::prepare_output(common.output_dir);

    ProfileOptions opts;
    opts.alpha = p.alpha;
    opts.bidirectional = p.bidirectional;
    opts.excluded_layers = {p.excluded_layers.begin(), p.excluded_layers.end()};
    opts.workers = common.workers;

    AnalyzeResult result;
    json summary = json::array();
    std::ostringstream md;
    md << "# Accent sensitivity summary\n\n| Accent | Top layer | Band | Top 3 layers |\n|---|---:|---|---|\n";
    for (const auto& accent : accents) {
        const auto cross = build_cross_pairs(store.manifest(), accent, p.cross_count, common.seed);
        const auto within = build_within_pairs(store.manifest(), accent, p.within_count, common.seed);
        auto profile = build_profile(accent, cross.pairs, within.pairs, store, *encoder, opts);

        const std::string stem = accsteer::detail::file_stem_for(accent);
        detail::write_json(common.output_dir / ("profile_" + stem + ".json"), to_json(profile));
        detail::write_text(common.output_dir / ("profile_" + stem + ".csv"), profile_csv(profile));

        std::vector<const LayerSensitivity*> ranked;
        for (const auto& l : profile.layers)
            if (!l.excluded)
                ranked.push_back(&l);
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto* a, const auto* b) { return a->sensitivity > b->sensitivity; });
        std::vector<std::size_t> top;
        for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i)
            if (ranked[i]->sensitivity > 0.0)
                top.push_back(ranked[i]->layer);

        const auto best = profile.argmax_layer();
        const bool informative = best && !profile.all_zero;
        json entry{{"accent", accent},
                   {"top_layers", top},
                   {"n_cross", cross.pairs.size()},
                   {"n_within", within.pairs.size()},
                   {"all_zero", profile.all_zero},
                   {"degenerate_range", profile.degenerate_range}};
        if (informative) {
            entry["top_layer"] = *best;
            entry["top_band"] = to_string(profile.layers[*best].band);
        }
        summary.push_back(entry);
        md << "| " << accent << " | " << (informative ? std::to_string(*best) : "-") << " | "
           << (informative ? to_string(profile.layers[*best].band) : "-") << " | " << detail::layer_list(top)
           << " |\n";
        result.profiles.push_back(std::move(profile));
    }
    detail::write_json(common.output_dir / "summary.json", summary);
    detail::write_text(common.output_dir / "summary.md", md.str());
    detail::write_json(common.output_dir / "run.json",
                       detail::run_manifest("analyze", common,
                                            {{"dataset", p.dataset.generic_string()},
                                             {"accents", accents},
                                             {"cross_count", p.cross_count},
                                             {"within_count", p.within_count},
                                             {"alpha", p.alpha},
                                             {"one_direction", !p.bidirectional},
                                             {"exclude_layers", p.excluded_layers}},
                                            {{"dataset", hex64(dataset_hash(store.manifest(), p.dataset))}}));
    result.summary = md.str();
    return result;
}

inline std::string cmd_analyze(const Common& common, const AnalyzeParams& p) { return run_analyze(common, p).summary; }

// ---------------------------------------------------------------------------
// extract-vector

struct SplitSource {
    fs::path split_file; // takes precedence when set
    double extraction_fraction = 0.8;
    std::size_t split_pairs = 1000;
};

inline SplitPlan load_or_make_split(const DatasetManifest& m, const std::string& accent, const SplitSource& s,
                                    std::uint64_t seed) {
    if (!s.split_file.empty()) {
        auto plan = split_from_json(detail::read_json(s.split_file));
        if (plan.accent != accent)
            throw ValidationError("split file is for '" + plan.accent + "', not '" + accent + "'");
        for (const auto& p : plan.extraction_pairs)
            if (!m.find(p.first_id) || !m.find(p.second_id))
                throw ValidationError("split references utterances missing from the dataset");
        for (const auto& id : plan.evaluation_utterances)
            if (!m.find(id))
                throw ValidationError("split references utterance '" + id + "' missing from the dataset");
        return plan;
    }
    return make_split(m, accent, s.extraction_fraction, seed, s.split_pairs);
}

struct ExtractParams {
    fs::path dataset;
    std::string accent;
    SplitSource split;
    std::vector<std::size_t> layers; // empty = all
    std::size_t sample_count = 1000;
    Orientation orientation = Orientation::accent_to_standard;
};

inline std::string cmd_extract_vector(const Common& common, const ExtractParams& p) {
    detail::require_dataset(p.dataset);
    if (p.accent.empty())
        throw ValidationError("--accent is required");
    const ActivationStore store(p.dataset);
    (void)detail::resolve_accents(store.manifest(), std::vector<std::string>{p.accent});
    const auto plan = load_or_make_split(store.manifest(), p.accent, p.split, common.seed);
    const std::size_t layer_count = store.layer_count();
    std::vector<std::size_t> layers = p.layers;
    if (layers.empty())
        for (std::size_t l = 0; l < layer_count; ++l)
            layers.push_back(l);
    for (std::size_t l : layers)
        if (l >= layer_count)
            throw ValidationError("layer " + std::to_string(l) + " out of range (L=" + std::to_string(layer_count) + ")");
    detail::prepare_output(common.output_dir);

    const std::string dhash = hex64(dataset_hash(store.manifest(), p.dataset));
    std::ostringstream os;
    for (std::size_t l : layers) {
        auto v = extract_steering_vector(plan, l, store, p.sample_count, common.seed, p.orientation);
        v.provenance["dataset_hash"] = dhash;
        write_steering_vector(common.output_dir / detail::vector_file_name(p.accent, l), v);
        os << "layer " << l << ": |mean shift| = " << v.original_norm << '\n';
    }
    detail::write_json(common.output_dir / "split.json", to_json(plan));
    json inputs{{"dataset", dhash}};
    if (!p.split.split_file.empty())
        inputs["split"] = detail::file_hash(p.split.split_file);
    detail::write_json(common.output_dir / "run.json",
                       detail::run_manifest("extract-vector", common,
                                            {{"dataset", p.dataset.generic_string()},
                                             {"accent", p.accent},
                                             {"split", p.split.split_file.generic_string()},
                                             {"extraction_fraction", p.split.extraction_fraction},
                                             {"split_pairs", p.split.split_pairs},
                                             {"layers", layers},
                                             {"sample_count", p.sample_count},
                                             {"orientation", to_string(p.orientation)}},
                                            inputs));
    return os.str();
}

// ---------------------------------------------------------------------------
// sweep

struct SweepParams {
    fs::path dataset;
    std::string accent;
    SplitSource split;
    fs::path vectors_dir; // empty = extract in-run
    std::vector<std::size_t> layers;
    std::vector<double> alphas{0.5, 1.0, 2.0, 5.0};
    std::size_t sample_count = 1000;
    std::size_t per_bucket = 100; // 0 = whole evaluation split
    Orientation orientation = Orientation::accent_to_standard;
    fs::path hypotheses;
};

struct SweepResult {
    SweepGrid grid;
    std::vector<BandSummary> bands;
    std::string summary;
};

inline SweepResult run_sweep_command(const Common& common, const SweepParams& p) {
    detail::require_dataset(p.dataset);
    if (p.accent.empty())
        throw ValidationError("--accent is required");
    const ActivationStore store(p.dataset);
    (void)detail::resolve_accents(store.manifest(), std::vector<std::string>{p.accent});
    const auto encoder = load_encoder(store);
    const auto transcriber = detail::make_transcriber(store, p.hypotheses);
    const std::size_t layer_count = encoder->spec().layer_count;

    SweepConfig cfg;
    cfg.accent = p.accent;
    cfg.layers = p.layers;
    cfg.alphas = p.alphas;
    cfg.seed = common.seed;
    cfg.workers = common.workers;
    if (cfg.alphas.empty())
        throw ValidationError("alpha grid is empty");
    for (std::size_t l : cfg.layers)
        if (l >= layer_count)
            throw ValidationError("layer " + std::to_string(l) + " out of range (L=" + std::to_string(layer_count) + ")");

    const auto plan = load_or_make_split(store.manifest(), p.accent, p.split, common.seed);
    json inputs{{"dataset", hex64(dataset_hash(store.manifest(), p.dataset))}};
    if (!p.split.split_file.empty())
        inputs["split"] = detail::file_hash(p.split.split_file);
    for (std::size_t l : cfg.resolved_layers(layer_count)) {
        if (!p.vectors_dir.empty()) {
            const fs::path f = p.vectors_dir / detail::vector_file_name(p.accent, l);
            if (!fs::exists(f))
                throw ValidationError("missing steering vector " + f.string());
            auto v = read_steering_vector(f);
            if (v.layer != l || !v.is_normalized)
                throw ValidationError(f.string() + " is not a normalized vector for layer " + std::to_string(l));
            inputs["vectors"][f.filename().string()] = detail::file_hash(f);
            cfg.vectors.emplace(l, std::move(v));
        } else {
            cfg.vectors.emplace(l, extract_steering_vector(plan, l, store, p.sample_count, common.seed, p.orientation));
        }
    }

    // Evaluation set: balanced over zero / positive base WER.
    const auto base = transcribe_baseline(plan.evaluation_utterances, store, *encoder, *transcriber, common.workers);
    std::vector<ScoredUtterance> scored;
    for (const auto& b : base)
        if (!b.failed)
            scored.push_back({b.utterance_id, b.score});
    json eval_info{{"split_evaluation_utterances", plan.evaluation_utterances.size()},
                   {"base_failures", base.size() - scored.size()}};
    if (p.per_bucket > 0) {
        const auto sample = balanced_sample(scored, p.per_bucket, common.seed);
        cfg.evaluation = sample.ids();
        eval_info["per_bucket"] = p.per_bucket;
        eval_info["zero_wer"] = sample.zero_wer.size();
        eval_info["positive_wer"] = sample.positive_wer.size();
        eval_info["zero_shortfall"] = sample.zero_shortfall;
        eval_info["positive_shortfall"] = sample.positive_shortfall;
    } else {
        for (const auto& s : scored)
            cfg.evaluation.push_back(s.utterance_id);
    }
    eval_info["utterances"] = cfg.evaluation;

    SweepResult r;
    r.grid = run_sweep(cfg, store, *encoder, *transcriber);
    r.bands = band_table(r.grid, layer_count);

    detail::prepare_output(common.output_dir);
    const fs::path& out = common.output_dir;
    detail::write_json(out / "grid.json", to_json(r.grid));
    detail::write_text(out / "grid.csv", grid_csv(r.grid));
    detail::write_text(out / "grid_long.csv", long_format_csv(r.grid));
    detail::write_text(out / "band_table.csv", band_table_csv(r.bands));
    detail::write_text(out / "band_table.md", band_table_markdown(p.accent, r.bands));
    detail::write_json(out / "evaluation.json", eval_info);
    detail::write_json(out / "split.json", to_json(plan));
    std::vector<std::size_t> swept = r.grid.layers;
    detail::write_json(out / "run.json",
                       detail::run_manifest("sweep", common,
                                            {{"dataset", p.dataset.generic_string()},
                                             {"accent", p.accent},
                                             {"split", p.split.split_file.generic_string()},
                                             {"extraction_fraction", p.split.extraction_fraction},
                                             {"split_pairs", p.split.split_pairs},
                                             {"vectors", p.vectors_dir.generic_string()},
                                             {"layers", swept},
                                             {"alphas", p.alphas},
                                             {"sample_count", p.sample_count},
                                             {"per_bucket", p.per_bucket},
                                             {"orientation", to_string(p.orientation)},
                                             {"hypotheses", p.hypotheses.generic_string()}},
                                            inputs));

    std::ostringstream os;
    os << r.grid.cells.size() << " cells over " << cfg.evaluation.size() << " utterances, base WER "
       << 100.0 * r.grid.wer_base << "%\n"
       << band_table_markdown(p.accent, r.bands);
    r.summary = os.str();
    return r;
}

inline std::string cmd_sweep(const Common& common, const SweepParams& p) { return run_sweep_command(common, p).summary; }

// ---------------------------------------------------------------------------
// wer

struct WerParams {
    std::string reference;
    std::string hypothesis;
    fs::path dataset;     // with hypotheses: score a whole hypothesis table
    fs::path hypotheses;
};

inline std::string cmd_wer(const Common& common, const WerParams& p) {
    if (p.dataset.empty() && p.hypotheses.empty()) {
        const auto s = wer(p.reference, p.hypothesis);
        std::ostringstream os;
        os << "ref_words=" << s.ref_words << " S=" << s.substitutions << " I=" << s.insertions << " D=" << s.deletions
           << " wer=" << s.wer() << '\n';
        return os.str();
    }
    detail::require_dataset(p.dataset);
    const ActivationStore store(p.dataset);
    std::unique_ptr<Transcriber> transcriber = detail::make_transcriber(store, p.hypotheses);
    std::vector<std::string> ids;
    for (const auto& e : store.manifest().records)
        ids.push_back(e.meta.utterance_id);
    const auto encoder = load_encoder(store);
    const auto base = transcribe_baseline(ids, store, *encoder, *transcriber, common.workers);
    std::vector<ScoredUtterance> scored;
    std::size_t failed = 0;
    for (const auto& b : base) {
        if (b.failed)
            ++failed;
        else
            scored.push_back({b.utterance_id, b.score});
    }
    detail::prepare_output(common.output_dir);
    detail::write_text(common.output_dir / "wer.csv", wer_csv(scored));
    json inputs{{"dataset", hex64(dataset_hash(store.manifest(), p.dataset))}};
    if (!p.hypotheses.empty())
        inputs["hypotheses"] = detail::file_hash(p.hypotheses);
    detail::write_json(common.output_dir / "run.json",
                       detail::run_manifest("wer", common,
                                            {{"dataset", p.dataset.generic_string()},
                                             {"hypotheses", p.hypotheses.generic_string()}},
                                            inputs));

    std::vector<WerScore> scores;
    for (const auto& s : scored)
        scores.push_back(s.score);
    std::ostringstream os;
    os << scored.size() << " utterances scored (" << failed << " without hypothesis), corpus WER "
       << 100.0 * corpus_wer(scores) << "%\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// report

struct ReportParams {
    std::vector<fs::path> grids;
    std::vector<fs::path> profiles;
    fs::path table; // accent,base,steered[,delta] in percent
};

inline std::string cmd_report(const Common& common, const ReportParams& p) {
    if (p.grids.empty() && p.profiles.empty() && p.table.empty())
        throw ValidationError("report needs at least one --grid, --profile or --table input");
    std::vector<SummaryRow> rows;
    json inputs = json::object();
    for (const auto& g : p.grids) {
        rows.push_back(summary_row(grid_from_json(detail::read_json(g))));
        inputs[g.generic_string()] = detail::file_hash(g);
    }
    if (!p.table.empty()) {
        std::ifstream in(p.table);
        if (!in)
            throw ValidationError("cannot open " + p.table.string());
        auto t = parse_summary_csv(in);
        rows.insert(rows.end(), t.begin(), t.end());
        inputs[p.table.generic_string()] = detail::file_hash(p.table);
    }
    std::vector<SensitivityProfile> profiles;
    for (const auto& f : p.profiles) {
        profiles.push_back(profile_from_json(detail::read_json(f)));
        inputs[f.generic_string()] = detail::file_hash(f);
    }

    std::ostringstream md;
    md << "# Steering report\n";
    if (!rows.empty())
        md << "\n## WER before and after steering\n\n" << summary_markdown(rows);
    if (!profiles.empty()) {
        md << "\n## Layer sensitivity\n";
        for (const auto& prof : profiles)
            md << '\n' << profile_markdown(prof);
    }
    detail::prepare_output(common.output_dir);
    detail::write_text(common.output_dir / "report.md", md.str());
    if (!rows.empty())
        detail::write_text(common.output_dir / "summary.csv", summary_csv(rows));
    std::vector<std::string> grids, profs;
    for (const auto& g : p.grids)
        grids.push_back(g.generic_string());
    for (const auto& f : p.profiles)
        profs.push_back(f.generic_string());
    detail::write_json(common.output_dir / "run.json",
                       detail::run_manifest("report", common,
                                            {{"grids", grids}, {"profiles", profs}, {"table", p.table.generic_string()}},
                                            inputs));
    return md.str();
}

} // namespace accsteer::cli

#endif // ACCSTEER_CLI_HPP

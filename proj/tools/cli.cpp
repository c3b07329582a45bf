#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wasp/data.hpp"
#include "wasp/detect.hpp"
#include "wasp/error.hpp"
#include "wasp/eval.hpp"
#include "wasp/reports.hpp"
#include "wasp/synthetic.hpp"
#include "wasp/train.hpp"
#include "wasp/wemb.hpp"

namespace wasp::cli {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct SynthFlags {
    CommonFlags common;
    fs::path out;
    SyntheticConfig cfg;
};

struct TrainFlags {
    CommonFlags common;
    fs::path train, val, classes, reg_concepts, out;
    std::string mode = "erm";
    std::size_t reg_random = 0;
    double temperature = kClipTemperature;
    TrainConfig cfg;
};

struct DetectFlags {
    CommonFlags common;
    fs::path probe, concepts, concepts_text, out, sc_out;
    std::size_t r = 5;
    std::size_t top_k = 0;
    double top_fraction = 0.0;
    std::string polarity = "positive";
    bool unfiltered = false;
    double temperature = kClipTemperature;
};

struct EvalFlags {
    CommonFlags common;
    fs::path probe, data, out;
    double temperature = kClipTemperature;
};

struct ZeroShotFlags {
    CommonFlags common;
    fs::path prompts, prompts_text, data, out;
    bool close_gap = false;
    double temperature = kClipTemperature;
};

struct CorrelateFlags {
    CommonFlags common;
    fs::path probe, data, concepts, concepts_text, out;
    std::optional<std::uint32_t> only_class;
    double temperature = kClipTemperature;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--seed", flags.seed, "Seed for every random choice")->capture_default_str();
    sub->add_option("--threads", flags.threads, "Worker threads for evaluation")
        ->capture_default_str()
        ->check(CLI::Range(1U, 256U));
}

void ensure_parent(const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::string fixed(double v, int precision = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

void print_metrics(const MetricsReport& m, std::ostream& out) {
    out << pad("metric", 28) << "value\n";
    out << pad("average_accuracy", 28) << fixed(m.average_accuracy) << '\n';
    out << pad("class_balanced_accuracy", 28) << fixed(m.class_balanced_accuracy) << '\n';
    out << pad("worst_group_accuracy", 28)
        << (m.worst_group_accuracy ? fixed(*m.worst_group_accuracy) : std::string("n/a")) << '\n';
    if (!m.per_group.empty()) {
        out << '\n' << pad("class", 8) << pad("attribute", 12) << pad("count", 10) << "accuracy\n";
        for (const auto& g : m.per_group) {
            out << pad(std::to_string(g.cls), 8) << pad(std::to_string(g.attribute), 12)
                << pad(std::to_string(g.count), 10) << fixed(g.accuracy) << '\n';
        }
    }
}

ConceptSet load_class_embeddings(const fs::path& path) {
    auto ds = load_embeddings(path);
    ConceptSet classes;
    const auto names_path = sidecar_path(path);
    if (fs::exists(names_path)) {
        for (auto& e : load_sidecar(names_path)) classes.texts.push_back(std::move(e.text));
        if (classes.texts.size() != ds.size()) {
            throw Error(ErrorCode::CountMismatch, names_path.string() + " does not match class embedding rows");
        }
    } else {
        for (std::size_t k = 0; k < ds.size(); ++k) classes.texts.push_back("class_" + std::to_string(k));
    }
    classes.embeddings = std::move(ds.embeddings);
    return classes;
}

int cmd_synth(SynthFlags& f, std::ostream& out) {
    f.cfg.seed = f.common.seed;
    const auto data = generate_synthetic(f.cfg);
    fs::create_directories(f.out);
    save_embeddings(f.out / "train.wemb", data.train);
    save_embeddings(f.out / "val.wemb", data.val);
    save_embeddings(f.out / "test.wemb", data.test);
    save_concepts(f.out / "concepts.wemb", f.out / "concepts.jsonl", data.concepts);
    save_concepts(f.out / "classes.wemb", f.out / "classes.jsonl", data.class_embs);
    const auto& c = f.cfg;
    write_json(f.out / "synth_config.json", {{"num_classes", c.num_classes},
                                              {"dim", c.dim},
                                              {"n_per_group", c.n_per_group},
                                              {"signal_class", c.signal_class},
                                              {"signal_attr", c.signal_attr},
                                              {"noise_sigma", c.noise_sigma},
                                              {"correlation", c.correlation},
                                              {"text_offset", c.text_offset},
                                              {"text_attr_leak", c.text_attr_leak},
                                              {"n_distractors", c.n_distractors},
                                              {"seed", c.seed}});
    out << "wrote synthetic splits to " << f.out.string() << '\n';
    return kOk;
}

int cmd_train(TrainFlags& f, std::ostream& out) {
    f.cfg.mode = parse_train_mode(f.mode);
    f.cfg.seed = f.common.seed;
    validate(f.cfg);
    if (f.cfg.mode == TrainMode::ErmPlusReg && f.reg_concepts.empty()) {
        throw Error(ErrorCode::ConfigInvalid, "--mode erm_plus_reg requires --reg-concepts");
    }

    const auto train_ds = load_embeddings(f.train);
    const auto val_ds = load_embeddings(f.val);
    const auto probe = init_probe(load_class_embeddings(f.classes), f.temperature);
    std::optional<ConceptSet> reg;
    if (!f.reg_concepts.empty()) {
        ConceptSet sc;
        sc.embeddings = load_embeddings(f.reg_concepts).embeddings;
        for (std::size_t i = 0; i < sc.embeddings.rows(); ++i) sc.texts.push_back("sc_" + std::to_string(i));
        if (f.reg_random > 0) sc = random_concepts(sc, f.reg_random, f.common.seed);
        reg = std::move(sc);
    }

    const auto report = train(probe, train_ds, val_ds, f.cfg, reg ? &*reg : nullptr);
    fs::create_directories(f.out);
    save_probe(f.out / "probe.wemb", report.final_probe);
    auto doc = to_json(report);
    doc["inputs"] = {{"train", f.train.string()},
                     {"val", f.val.string()},
                     {"classes", f.classes.string()},
                     {"reg_concepts", f.reg_concepts.string()},
                     {"reg_random", f.reg_random}};
    write_json(f.out / "train_report.json", doc);
    out << "best epoch " << report.best_epoch << " of " << report.history.size() << ", val class-balanced accuracy "
        << fixed(report.history.empty() ? 0.0 : report.history[report.best_epoch - 1].val_class_balanced_accuracy)
        << '\n';
    return kOk;
}

int cmd_detect(DetectFlags& f, bool has_top_k, bool has_fraction, std::ostream& out, std::ostream& err) {
    const auto polarity = parse_polarity(f.polarity);
    Strategy strategy = DynamicStrategy{f.r};
    if (has_top_k) strategy = TopKStrategy{f.top_k};
    if (has_fraction) strategy = TopFractionStrategy{f.top_fraction};

    const auto probe = load_probe(f.probe, f.temperature);
    auto concepts = load_concepts(f.concepts, f.concepts_text);
    concepts.filtered = !f.unfiltered;
    validate(concepts);

    const auto report = detect(probe, concepts, strategy, polarity);
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    ensure_parent(f.out);
    write_json(f.out, to_json(report));
    if (!f.sc_out.empty()) {
        ensure_parent(f.sc_out);
        save_concepts(f.sc_out, sidecar_path(f.sc_out), selected_concepts(report, concepts));
    }

    out << pad("class", 20) << pad("m_k", 6) << pad("rank", 6) << pad("score", 14) << "concept\n";
    for (const auto& cls : report.classes) {
        const std::size_t shown = std::min<std::size_t>(5, cls.selected.size());
        for (std::size_t i = 0; i < shown; ++i) {
            out << pad(i == 0 ? cls.name : "", 20) << pad(i == 0 ? std::to_string(cls.m_k) : "", 6)
                << pad(std::to_string(i + 1), 6) << pad(fixed(cls.selected[i].score, 9), 14) << cls.selected[i].text
                << '\n';
        }
        if (cls.near_zero) out << pad("", 20) << "(top score within noise floor " << fixed(cls.noise_floor, 6) << ")\n";
    }
    return kOk;
}

int cmd_eval(EvalFlags& f, std::ostream& out) {
    const auto probe = load_probe(f.probe, f.temperature);
    const auto ds = load_embeddings(f.data);
    const auto metrics = evaluate(probe, ds, f.common.threads);
    ensure_parent(f.out);
    auto doc = to_json(metrics);
    doc["config"] = {{"probe", f.probe.string()}, {"data", f.data.string()}, {"temperature", f.temperature}};
    write_json(f.out, doc);
    print_metrics(metrics, out);
    return kOk;
}

int cmd_zeroshot(ZeroShotFlags& f, std::ostream& out) {
    auto prompt_rows = load_embeddings(f.prompts);
    const auto entries = load_sidecar(f.prompts_text);
    if (entries.size() != prompt_rows.size()) {
        throw Error(ErrorCode::CountMismatch, "prompt texts do not match prompt embedding rows");
    }
    ConceptSet prompt_set;
    std::vector<std::uint32_t> classes;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        prompt_set.texts.push_back(entries[i].text);
        if (entries[i].class_index) {
            classes.push_back(*entries[i].class_index);
        } else if (prompt_rows.labels) {
            classes.push_back((*prompt_rows.labels)[i]);
        } else {
            throw Error(ErrorCode::ConfigInvalid, "prompt line " + std::to_string(i + 1) + " has no class");
        }
    }
    prompt_set.embeddings = std::move(prompt_rows.embeddings);
    const std::size_t n_classes = *std::max_element(classes.begin(), classes.end()) + 1;
    const auto prompts = make_prompt_set(std::move(prompt_set), std::move(classes), n_classes);

    auto ds = load_embeddings(f.data);
    if (f.close_gap) ds = close_modality_gap(ds, prompts.prompts);
    const auto metrics = zero_shot_maxpool(prompts, ds, f.temperature, f.common.threads);
    ensure_parent(f.out);
    auto doc = to_json(metrics);
    doc["config"] = {{"prompts", f.prompts.string()},
                     {"data", f.data.string()},
                     {"close_gap", f.close_gap},
                     {"temperature", f.temperature}};
    write_json(f.out, doc);
    print_metrics(metrics, out);
    return kOk;
}

int cmd_correlate(CorrelateFlags& f, std::ostream& out) {
    const auto probe = load_probe(f.probe, f.temperature);
    auto ds = load_embeddings(f.data);
    const auto concepts = load_concepts(f.concepts, f.concepts_text);
    if (f.only_class) {
        const auto& labels = ds.require_labels();
        std::vector<std::size_t> keep;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] == *f.only_class) keep.push_back(j);
        }
        if (keep.empty()) throw Error(ErrorCode::EmptyResult, "no sample of class " + std::to_string(*f.only_class));
        ds = select_rows(ds, keep);
    }
    const auto result = loss_similarity_correlation(probe, ds, concepts);
    ensure_parent(f.out);
    auto doc = to_json(result);
    doc["config"] = {{"probe", f.probe.string()},
                     {"data", f.data.string()},
                     {"only_class", f.only_class ? nlohmann::json(*f.only_class) : nlohmann::json(nullptr)}};
    write_json(f.out, doc);
    out << pad("concept", 32) << "pearson_r\n";
    for (const auto& c : result) out << pad(c.text, 32) << (c.r ? fixed(*c.r, 6) : std::string("undefined")) << '\n';
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spurious-correlation detection and mitigation on frozen embeddings", "wasp"};
    app.require_subcommand(1);

    SynthFlags synth;
    auto* s = app.add_subcommand("synth", "Generate a planted-shortcut synthetic dataset");
    add_common(s, synth.common);
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--num-classes", synth.cfg.num_classes)->capture_default_str();
    s->add_option("--dim", synth.cfg.dim)->capture_default_str();
    s->add_option("--n-per-group", synth.cfg.n_per_group)->capture_default_str();
    s->add_option("--signal-class", synth.cfg.signal_class)->capture_default_str();
    s->add_option("--signal-attr", synth.cfg.signal_attr)->capture_default_str();
    s->add_option("--noise", synth.cfg.noise_sigma)->capture_default_str();
    s->add_option("--correlation", synth.cfg.correlation)->capture_default_str();
    s->add_option("--text-offset", synth.cfg.text_offset)->capture_default_str();
    s->add_option("--text-leak", synth.cfg.text_attr_leak)->capture_default_str();
    s->add_option("--distractors", synth.cfg.n_distractors)->capture_default_str();

    TrainFlags tr;
    auto* t = app.add_subcommand("train", "Train a linear probe from class-name initialization");
    add_common(t, tr.common);
    t->add_option("--train", tr.train, "Training split (.wemb)")->required()->check(CLI::ExistingFile);
    t->add_option("--val", tr.val, "Validation split (.wemb)")->required()->check(CLI::ExistingFile);
    t->add_option("--classes", tr.classes, "Class-name embeddings (.wemb, names in .jsonl sidecar)")
        ->required()
        ->check(CLI::ExistingFile);
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--mode", tr.mode, "erm | erm_plus_reg | group_dro")->capture_default_str();
    t->add_option("--reg-concepts", tr.reg_concepts, "Spurious-concept embeddings (.wemb)")->check(CLI::ExistingFile);
    t->add_option("--reg-random", tr.reg_random, "Regularize with this many random rows of --reg-concepts");
    t->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
    t->add_option("--weight-decay", tr.cfg.weight_decay)->capture_default_str();
    t->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
    t->add_option("--max-epochs", tr.cfg.max_epochs)->capture_default_str();
    t->add_option("--patience", tr.cfg.patience)->capture_default_str();
    t->add_option("--alpha", tr.cfg.alpha)->capture_default_str();
    t->add_option("--groupdro-step", tr.cfg.groupdro_step)->capture_default_str();
    t->add_option("--temperature", tr.temperature)->capture_default_str();

    DetectFlags det;
    auto* d = app.add_subcommand("detect", "Rank class-neutral concepts against learned class weights");
    add_common(d, det.common);
    d->add_option("--probe", det.probe, "Trained probe (.wemb)")->required()->check(CLI::ExistingFile);
    d->add_option("--concepts", det.concepts, "Concept embeddings (.wemb)")->required()->check(CLI::ExistingFile);
    d->add_option("--concepts-text", det.concepts_text, "Concept texts (.jsonl)")
        ->required()
        ->check(CLI::ExistingFile);
    d->add_option("--out", det.out, "Report path (.json)")->required();
    auto* r_opt = d->add_option("--r", det.r, "Smoothing window for dynamic thresholding")->capture_default_str();
    auto* k_opt = d->add_option("--top-k", det.top_k, "Keep a fixed number of concepts per class");
    auto* f_opt = d->add_option("--top-fraction", det.top_fraction, "Keep a fixed fraction of concepts per class");
    r_opt->excludes(k_opt)->excludes(f_opt);
    k_opt->excludes(f_opt);
    d->add_option("--polarity", det.polarity, "positive | negative")->capture_default_str();
    d->add_option("--sc-out", det.sc_out, "Also write the union of selected concepts (.wemb + .jsonl)");
    d->add_flag("--unfiltered", det.unfiltered, "Concepts were not filtered for class-related terms");
    d->add_option("--temperature", det.temperature)->capture_default_str();

    EvalFlags ev;
    auto* e = app.add_subcommand("eval", "Group-wise accuracy of a probe");
    add_common(e, ev.common);
    e->add_option("--probe", ev.probe)->required()->check(CLI::ExistingFile);
    e->add_option("--data", ev.data)->required()->check(CLI::ExistingFile);
    e->add_option("--out", ev.out)->required();
    e->add_option("--temperature", ev.temperature)->capture_default_str();

    ZeroShotFlags zs;
    auto* z = app.add_subcommand("zeroshot", "Zero-shot classification with max-pooling over class prompts");
    add_common(z, zs.common);
    z->add_option("--prompts", zs.prompts, "Prompt embeddings (.wemb)")->required()->check(CLI::ExistingFile);
    z->add_option("--prompts-text", zs.prompts_text, "Prompt texts with \"class\" (.jsonl)")
        ->required()
        ->check(CLI::ExistingFile);
    z->add_option("--data", zs.data)->required()->check(CLI::ExistingFile);
    z->add_option("--out", zs.out)->required();
    z->add_flag("--close-gap", zs.close_gap, "Shift samples by half the image-text gap first");
    z->add_option("--temperature", zs.temperature)->capture_default_str();

    CorrelateFlags co;
    auto* c = app.add_subcommand("correlate", "Pearson r between per-sample loss and concept similarity");
    add_common(c, co.common);
    c->add_option("--probe", co.probe)->required()->check(CLI::ExistingFile);
    c->add_option("--data", co.data)->required()->check(CLI::ExistingFile);
    c->add_option("--concepts", co.concepts)->required()->check(CLI::ExistingFile);
    c->add_option("--concepts-text", co.concepts_text)->required()->check(CLI::ExistingFile);
    c->add_option("--only-class", co.only_class, "Restrict to samples of one class");
    c->add_option("--out", co.out)->required();
    c->add_option("--temperature", co.temperature)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        return kConfig;
    }

    try {
        if (s->parsed()) return cmd_synth(synth, out);
        if (t->parsed()) return cmd_train(tr, out);
        if (d->parsed()) return cmd_detect(det, k_opt->count() > 0, f_opt->count() > 0, out, err);
        if (e->parsed()) return cmd_eval(ev, out);
        if (z->parsed()) return cmd_zeroshot(zs, out);
        if (c->parsed()) return cmd_correlate(co, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        switch (category(ex.code())) {
            case ErrorCategory::Format: return kFormat;
            case ErrorCategory::Config: return kConfig;
            case ErrorCategory::Runtime: return kRuntime;
        }
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kRuntime;
    }
    return kRuntime;
}

}  // namespace wasp::cli

#include "cli.hpp"

#include "mlsolve/amplitude.hpp"
#include "mlsolve/errors.hpp"
#include "mlsolve/inference.hpp"
#include "mlsolve/io.hpp"
#include "mlsolve/kinematics.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <ostream>

namespace mlsolve::cli {

namespace {

using Json = nlohmann::ordered_json;

struct RunConfig {
    std::string family = "chy";
    int m = 0;
    int k = 0;
    int l = 0;
    int n = 0;
    int d = 0;
    std::uint64_t model_seed = 0;
    bool chart = false;

    std::string data;
    std::string solutions;
    std::string output;
    std::string cache_dir;
    std::string format = "json";
    std::uint64_t seed = 1;
    int workers = 0;
    bool long_running = false;
    bool no_certify = false;
    bool no_cache = false;
    bool real_fast = false;
    bool oracle = false;
    bool per_point = false;
    double tolerance = 0.0;
    double inflation = 0.0;
    int stability_runs = 3;
    int max_runs = 8;
};

void add_model_options(CLI::App* app, RunConfig& c)
{
    app->add_option("--family", c.family, "chy, cegm3, linear, tensor, simplex, independence")->required();
    app->add_option("--m", c.m, "points (chy, cegm3) or tensor dimension");
    app->add_option("--k", c.k, "tensor rank");
    app->add_option("--l", c.l, "tensor order");
    app->add_option("--n", c.n, "linear/simplex size");
    app->add_option("--d", c.d, "linear model dimension");
    app->add_option("--model-seed", c.model_seed, "seed of a random linear model");
    app->add_flag("--chart", c.chart, "use the positive chart");
}

void add_run_options(CLI::App* app, RunConfig& c)
{
    app->add_option("--workers", c.workers, "worker threads (0 = all, 1 = serial and deterministic)");
    app->add_option("--seed", c.seed, "random seed");
    app->add_option("--cache-dir", c.cache_dir, "start-system cache directory (default $MLSOLVE_CACHE_DIR)");
    app->add_flag("--no-cache", c.no_cache, "neither read nor write the start-system cache");
    app->add_flag("--long", c.long_running, "allow long-running sizes");
    app->add_option("--tolerance", c.tolerance, "tracker endpoint tolerance (scaled residual)");
    app->add_option("--inflation", c.inflation, "Krawczyk box inflation");
    app->add_option("--format", c.format, "output format")->check(CLI::IsMember({"json"}));
    app->add_option("-o,--output", c.output, "output file (default stdout)");
}

ModelDescriptor descriptor(const RunConfig& c)
{
    ModelDescriptor d;
    d.family = parse_family(c.family);
    d.m = c.m;
    d.k = c.k;
    d.l = c.l;
    d.n = c.n;
    d.d = c.d;
    d.seed = c.model_seed;
    d.chart = c.chart;
    return d;
}

/// Sizes whose offline step takes minutes to hours on one machine.
bool is_long(const ModelSpec& model)
{
    const auto& d = model.descriptor;
    if (d.family == Family::chy)
        return d.m >= 11;
    if (d.family == Family::cegm3)
        return d.m >= 8;
    return model.known_solution_count && *model.known_solution_count > 5000;
}

ModelSpec build_model(const RunConfig& c, bool gate)
{
    auto model = make_model(descriptor(c));
    if (gate && is_long(model) && !c.long_running)
        throw Error(model.name + " is a long-running size; pass --long to run it");
    return model;
}

InferenceOptions inference_options(const RunConfig& c)
{
    InferenceOptions o;
    o.workers = c.workers;
    o.seed = c.seed;
    o.cache_dir = c.cache_dir;
    o.use_cache = !c.no_cache;
    o.certify = !c.no_certify;
    if (c.tolerance > 0.0)
        o.tracker.tolerance = c.tolerance;
    if (c.inflation > 0.0)
        o.krawczyk.inflation = c.inflation;
    return o;
}

std::string dec(double v) { return to_decimal17(v); }

Json summary_json(const CertifySummary& s)
{
    return {{"points", s.points},
            {"certified", s.certified},
            {"distinct", s.distinct},
            {"real_certified", s.real_certified},
            {"heuristic_real", s.heuristic_real}};
}

void emit(const RunConfig& c, std::ostream& out, const std::string& text)
{
    if (c.output.empty())
        out << text;
    else
        write_file_atomic(c.output, text);
}

const ModelSpec& base_of(const ModelSpec& model)
{
    return model.chart && model.chart->base ? *model.chart->base : model;
}

std::vector<Rational> load_data(const RunConfig& c, const ModelSpec& model)
{
    if (c.data.empty())
        throw DataError("--data is required");
    return order_counts(model, read_data(c.data));
}

int cmd_model_info(const RunConfig& c, std::ostream& out)
{
    auto model = build_model(c, false);
    Json j;
    j["model"] = model.descriptor.canonical();
    j["name"] = model.name;
    j["digest"] = model.digest();
    j["unknowns"] = model.unknown_names;
    j["states"] = model.labels;
    j["num_states"] = model.num_states();
    j["linear"] = model.linear;
    j["potential_only"] = model.potential_only;
    j["group_order"] = model.group_order();
    if (model.known_solution_count)
        j["known_solution_count"] = *model.known_solution_count;
    if (model.chart) {
        Json chart;
        chart["factors"] = model.chart->factor_text;
        j["chart"] = chart;
    }
    j["long_running"] = is_long(model);
    emit(c, out, j.dump(2) + "\n");
    return complete;
}

int cmd_prepare(const RunConfig& c, std::ostream& out)
{
    auto model = build_model(c, true);
    const ModelSpec& base = base_of(model);
    auto sys = gradient(build_potential(base));
    auto opt = inference_options(c);
    auto cache = prepare_start_system(base, sys, opt);
    Json j;
    j["model"] = base.descriptor.canonical();
    j["solutions"] = cache.solutions.size();
    if (cache.expected)
        j["expected"] = *cache.expected;
    j["complete"] = cache.complete;
    if (opt.use_cache) {
        const auto dir = opt.cache_dir.empty() ? default_cache_dir() : opt.cache_dir;
        const auto path = cache_path(base, dir);
        write_file_atomic(path, cache_to_json(cache));
        j["cache"] = path;
    }
    emit(c, out, j.dump(2) + "\n");
    return cache.complete || !cache.expected ? complete : partial;
}

int cmd_solve(const RunConfig& c, std::ostream& out, std::ostream& err)
{
    auto model = build_model(c, true);
    const ModelSpec& base = base_of(model);
    auto data = load_data(c, base);
    auto report = solve_model(base, gradient(build_potential(base)), data, inference_options(c));
    for (const auto& w : report.warnings)
        err << "warning: " << w << "\n";
    auto text = solutions_to_json(report.set, base, report.summary);
    if (c.output.empty()) {
        out << text;
    } else {
        write_file_atomic(c.output, text);
        Json j;
        j["model"] = base.descriptor.canonical();
        j["solutions"] = report.set.points.size();
        j["homotopy_failures"] = report.homotopy_failures;
        j["topped_up"] = report.topped_up;
        if (report.summary)
            j["certification"] = summary_json(*report.summary);
        j["complete"] = report.set.complete;
        j["output"] = c.output;
        out << j.dump(2) << "\n";
    }
    const bool certified = report.summary && report.summary->certified == report.set.points.size();
    return report.set.complete && certified ? complete : partial;
}

int cmd_mle(const RunConfig& c, std::ostream& out)
{
    auto model = build_model(c, true);
    const ModelSpec& base = base_of(model);
    auto data = load_data(c, base);
    auto res = mle(base, gradient(build_potential(base)), data, c.real_fast ? MLEMode::fast : MLEMode::full,
                   inference_options(c));
    Json j;
    j["model"] = base.descriptor.canonical();
    j["mode"] = c.real_fast ? "real-fast" : "full";
    Json x = Json::object();
    for (std::size_t i = 0; i < res.x.size(); ++i)
        x[base.unknown_names[i]] = dec(res.x[i]);
    j["x"] = x;
    Json p = Json::object();
    for (std::size_t i = 0; i < res.p.size(); ++i)
        p[base.labels[i]] = dec(res.p[i]);
    j["p"] = p;
    j["log_likelihood"] = dec(res.log_likelihood);
    if (!c.real_fast) {
        j["domain_points"] = res.domain_points;
        j["margin"] = std::isfinite(res.margin) ? Json(dec(res.margin)) : Json("inf");
    }
    bool ok = true;
    if (res.report) {
        j["solutions"] = res.report->set.points.size();
        if (res.report->summary)
            j["certification"] = summary_json(*res.report->summary);
        j["complete"] = res.report->set.complete;
        ok = res.report->set.complete;
    }
    emit(c, out, j.dump(2) + "\n");
    return ok ? complete : partial;
}

int cmd_mldegree(const RunConfig& c, std::ostream& out)
{
    auto model = build_model(c, true);
    const ModelSpec& base = base_of(model);
    MLDegreeOptions deg;
    deg.stability_runs = c.stability_runs;
    deg.max_runs = c.max_runs;
    auto r = ml_degree(base, gradient(build_potential(base)), inference_options(c), deg);
    Json j;
    j["model"] = base.descriptor.canonical();
    j["certified_lower_bound"] = r.certified_lower_bound;
    j["gradient_zeros"] = r.gradient_zeros;
    j["group_order"] = r.group_order;
    j["estimate"] = r.estimate;
    j["estimate_note"] = "stabilized monodromy count, not a proof of the upper bound";
    j["stabilized"] = r.stabilized;
    j["run_counts"] = r.run_counts;
    emit(c, out, j.dump(2) + "\n");
    return r.stabilized ? complete : partial;
}

int cmd_certify(const RunConfig& c, std::ostream& out)
{
    if (c.solutions.empty())
        throw DataError("--solutions is required");
    auto text = read_file(c.solutions);
    auto file = solutions_from_json(text);
    ModelSpec model = make_model(ModelDescriptor::parse(file.model));
    file = solutions_from_json(text, &model);
    auto sys = gradient(build_potential(model));
    auto box = parameter_box(file.set);
    KrawczykOptions ko;
    if (c.inflation > 0.0)
        ko.inflation = c.inflation;
    auto points = file.set.points;
    auto summary = certify_set(sys, box, points, ko, c.workers);
    Json j;
    j["model"] = file.model;
    j["certification"] = summary_json(summary);
    if (file.summary) {
        const auto& f = *file.summary;
        j["matches_file_summary"] = f.points == summary.points && f.certified == summary.certified &&
                                    f.distinct == summary.distinct && f.real_certified == summary.real_certified &&
                                    f.heuristic_real == summary.heuristic_real;
    }
    if (!c.output.empty()) {
        auto set = file.set;
        set.points = std::move(points);
        write_solutions(set, model, c.output, summary);
        j["output"] = c.output;
    }
    out << j.dump(2) << "\n";
    const bool all = summary.certified == summary.points && summary.distinct == summary.points;
    const bool count_ok = !file.set.expected || summary.distinct == *file.set.expected;
    return all && count_ok ? complete : partial;
}

int cmd_amplitude(const RunConfig& c, std::ostream& out)
{
    auto model = build_model(c, true);
    ModelSpec chart_model = model.chart ? model : positive_chart(model);
    auto data = load_data(c, chart_model);
    auto res = amplitude(chart_model, data, inference_options(c));
    if (c.oracle && !res.oracle)
        throw DataError("no closed-form oracle for " + chart_model.descriptor.canonical() +
                        " (triangle: simplex n=2, square: independence, associahedron_m6: chy m=6)");
    if (!c.oracle)
        res.oracle.reset();
    emit(c, out, amplitude_to_json(res, chart_model, c.per_point));
    const bool solved = !res.report || res.report->set.complete;
    return res.reliable && solved ? complete : partial;
}

int cmd_kinematics(const RunConfig& c, std::ostream& out)
{
    auto fam = parse_family(c.family);
    if (c.data.empty())
        throw DataError("--data is required");
    auto counts = read_data(c.data);
    Json j;
    j["family"] = family_name(fam);
    j["m"] = c.m;
    Json s = Json::object();
    if (fam == Family::chy) {
        auto full = complete_k2(counts, c.m);
        for (int i = 1; i <= c.m; ++i)
            for (int k = i + 1; k <= c.m; ++k)
                s[c.m <= 9 ? std::to_string(i) + std::to_string(k) : std::to_string(i) + "," + std::to_string(k)] =
                    to_string(full(i, k));
    } else if (fam == Family::cegm3) {
        auto full = complete_k3(counts, c.m);
        for (int i = 1; i <= c.m; ++i)
            for (int k = i + 1; k <= c.m; ++k)
                for (int l = k + 1; l <= c.m; ++l) {
                    auto key = c.m <= 9 ? std::to_string(i) + std::to_string(k) + std::to_string(l)
                                        : std::to_string(i) + "," + std::to_string(k) + "," + std::to_string(l);
                    s[key] = to_string(full(i, k, l));
                }
    } else {
        throw DataError("kinematics completion is defined for chy and cegm3");
    }
    j["mandelstam"] = s;
    emit(c, out, j.dump(2) + "\n");
    return complete;
}

std::string error_kind(const Error& e)
{
    if (dynamic_cast<const FormatError*>(&e))
        return "malformed input";
    if (dynamic_cast<const CacheError*>(&e))
        return "cache";
    if (dynamic_cast<const DataError*>(&e))
        return "data";
    if (dynamic_cast<const ModelError*>(&e))
        return "model";
    if (dynamic_cast<const SolveError*>(&e))
        return "solve";
    return "run";
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig c;
    CLI::App app{"Certified critical points of log-likelihood and scattering potentials"};
    app.name("mlsolve");
    app.require_subcommand(1);

    auto* model_cmd = app.add_subcommand("model", "model descriptions");
    model_cmd->require_subcommand(1);
    auto* info = model_cmd->add_subcommand("info", "unknowns, states, digest and chart of a model");
    add_model_options(info, c);
    info->add_option("-o,--output", c.output, "output file");
    info->add_option("--format", c.format)->check(CLI::IsMember({"json"}));

    auto* prepare = app.add_subcommand("prepare", "offline monodromy into the start-system cache");
    add_model_options(prepare, c);
    add_run_options(prepare, c);

    auto* solve = app.add_subcommand("solve", "all critical points at the data, certified");
    add_model_options(solve, c);
    add_run_options(solve, c);
    solve->add_option("--data", c.data, "data file {label: count}")->required();
    solve->add_flag("--no-certify", c.no_certify, "skip Krawczyk certification");

    auto* mle_cmd = app.add_subcommand("mle", "maximum likelihood estimate");
    add_model_options(mle_cmd, c);
    add_run_options(mle_cmd, c);
    mle_cmd->add_option("--data", c.data, "data file")->required();
    mle_cmd->add_flag("--real-fast", c.real_fast, "track only the domain solution over the reals (linear models)");

    auto* deg = app.add_subcommand("mldegree", "ML degree by repeated monodromy");
    add_model_options(deg, c);
    add_run_options(deg, c);
    deg->add_option("--stability-runs", c.stability_runs, "equal consecutive counts required");
    deg->add_option("--max-runs", c.max_runs, "run budget");

    auto* cert = app.add_subcommand("certify", "re-certify a solutions file");
    cert->add_option("--solutions", c.solutions, "solutions file")->required();
    cert->add_option("--workers", c.workers, "worker threads");
    cert->add_option("--inflation", c.inflation, "Krawczyk box inflation");
    cert->add_option("-o,--output", c.output, "write the re-certified solutions here");
    cert->add_option("--format", c.format)->check(CLI::IsMember({"json"}));

    auto* amp = app.add_subcommand("amplitude", "string amplitude over the critical points in a positive chart");
    add_model_options(amp, c);
    add_run_options(amp, c);
    amp->add_option("--data", c.data, "data file")->required();
    amp->add_flag("--oracle", c.oracle, "include the closed-form value");
    amp->add_flag("--per-point", c.per_point, "list every critical point and determinant");

    auto* kin = app.add_subcommand("kinematics", "Mandelstam arrays");
    kin->require_subcommand(1);
    auto* kcomplete = kin->add_subcommand("complete", "complete counts to the full Mandelstam array");
    kcomplete->add_option("--family", c.family, "chy or cegm3")->required();
    kcomplete->add_option("--m", c.m, "number of points")->required();
    kcomplete->add_option("--data", c.data, "data file")->required();
    kcomplete->add_option("-o,--output", c.output, "output file");
    kcomplete->add_option("--format", c.format)->check(CLI::IsMember({"json"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return complete;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return complete;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << "\n";
        return error;
    }

    try {
        if (info->parsed())
            return cmd_model_info(c, out);
        if (prepare->parsed())
            return cmd_prepare(c, out);
        if (solve->parsed())
            return cmd_solve(c, out, err);
        if (mle_cmd->parsed())
            return cmd_mle(c, out);
        if (deg->parsed())
            return cmd_mldegree(c, out);
        if (cert->parsed())
            return cmd_certify(c, out);
        if (amp->parsed())
            return cmd_amplitude(c, out);
        if (kcomplete->parsed())
            return cmd_kinematics(c, out);
    } catch (const Error& e) {
        err << "error: " << error_kind(e) << ": " << e.what() << "\n";
        return error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return error;
    }
    err << "error: no command\n";
    return error;
}

} // namespace mlsolve::cli

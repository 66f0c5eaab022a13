#include "mlsolve/io.hpp"

#include "mlsolve/errors.hpp"

#include "json.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace mlsolve {

namespace {

/// Keeps the source text of every number so decimals convert exactly.
class DataSax : public nlohmann::json_sax<nlohmann::json> {
public:
    LabeledCounts counts;

    bool null() override { return fail("null value"); }
    bool boolean(bool) override { return fail("boolean value"); }
    bool number_integer(number_integer_t v) override { return put(Rational(std::to_string(v))); }
    bool number_unsigned(number_unsigned_t v) override { return put(Rational(std::to_string(v))); }
    bool number_float(number_float_t, const string_t& s) override { return put(parse_rational(s)); }
    bool string(string_t& s) override
    {
        if (depth_ != 1)
            return fail("unexpected string");
        return put(parse_rational(s));
    }
    bool binary(binary_t&) override { return fail("binary value"); }
    bool start_object(std::size_t) override
    {
        if (++depth_ > 1)
            return fail("nested object");
        return true;
    }
    bool key(string_t& k) override
    {
        key_ = k;
        return true;
    }
    bool end_object() override
    {
        --depth_;
        return true;
    }
    bool start_array(std::size_t) override { return fail("array value"); }
    bool end_array() override { return false; }
    bool parse_error(std::size_t pos, const std::string&, const nlohmann::detail::exception& ex) override
    {
        throw FormatError("malformed data file at byte " + std::to_string(pos) + ": " + ex.what());
    }

private:
    bool put(Rational v)
    {
        if (depth_ != 1)
            return fail("data must be a flat object");
        if (!counts.emplace(key_, std::move(v)).second)
            throw FormatError("label " + key_ + " appears twice");
        return true;
    }
    bool fail(const std::string& what) { throw FormatError("data file: " + what + (key_.empty() ? "" : " at label " + key_)); }

    int depth_ = 0;
    std::string key_;
};

} // namespace

LabeledCounts parse_data(const std::string& json_text)
{
    DataSax sax;
    try {
        nlohmann::json::sax_parse(json_text, &sax);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("data file: ") + e.what());
    }
    return std::move(sax.counts);
}

LabeledCounts read_data(const std::string& path) { return parse_data(read_file(path)); }

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& contents)
{
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path())
        fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw FormatError("cannot write " + tmp.string());
        out << contents;
        if (!out.flush())
            throw FormatError("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

namespace {

using Json = nlohmann::ordered_json;

Json complex_json(const Complex& z) { return Json::array({to_decimal17(z.real()), to_decimal17(z.imag())}); }

Json vector_json(std::span<const Complex> v)
{
    Json a = Json::array();
    for (const auto& z : v)
        a.push_back(complex_json(z));
    return a;
}

Json interval_json(const Interval& i) { return Json::array({to_decimal17(i.lo), to_decimal17(i.hi)}); }

Json box_json(const std::vector<ComplexInterval>& box)
{
    Json a = Json::array();
    for (const auto& b : box)
        a.push_back(Json::array({interval_json(b.re), interval_json(b.im)}));
    return a;
}

double number(const Json& j, const char* what)
{
    if (!j.is_string())
        throw FormatError(std::string("expected a decimal string for ") + what);
    return parse_double(j.get<std::string>());
}

Complex complex_of(const Json& j)
{
    if (!j.is_array() || j.size() != 2)
        throw FormatError("complex numbers are [re, im] pairs");
    return {number(j[0], "a real part"), number(j[1], "an imaginary part")};
}

std::vector<Complex> vector_of(const Json& j)
{
    if (!j.is_array())
        throw FormatError("expected an array of complex numbers");
    std::vector<Complex> v;
    for (const auto& e : j)
        v.push_back(complex_of(e));
    return v;
}

Interval interval_of(const Json& j)
{
    if (!j.is_array() || j.size() != 2)
        throw FormatError("intervals are [lo, hi] pairs");
    return {number(j[0], "an interval end"), number(j[1], "an interval end")};
}

std::vector<ComplexInterval> box_of(const Json& j)
{
    std::vector<ComplexInterval> box;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2)
            throw FormatError("box entries are [re, im] interval pairs");
        box.emplace_back(interval_of(e[0]), interval_of(e[1]));
    }
    return box;
}

Json parse_json(const std::string& text, const char* what)
{
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed ") + what + ": " + e.what());
    }
}

void check_header(const Json& j, const char* format, int version)
{
    if (!j.is_object() || j.value("format", std::string()) != format)
        throw FormatError(std::string("not a ") + format + " file");
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != version)
        throw FormatError(std::string("unsupported ") + format + " version");
}

} // namespace

std::string solutions_to_json(const SolutionSet& set, const ModelSpec& model,
                              const std::optional<CertifySummary>& summary)
{
    Json j;
    j["format"] = "mlsolve-solutions";
    j["version"] = solutions_format_version;
    j["model"] = model.descriptor.canonical();
    j["model_digest"] = model.digest();
    j["parameters"] = vector_json(set.parameters);
    if (set.exact_parameters) {
        Json e = Json::array();
        for (const auto& q : *set.exact_parameters)
            e.push_back(to_string(q));
        j["exact_parameters"] = e;
    }
    j["expected"] = set.expected ? Json(*set.expected) : Json(nullptr);
    j["complete"] = set.complete;
    Json sols = Json::array();
    for (const auto& p : set.points) {
        Json s;
        s["x"] = vector_json(p.x);
        s["residual"] = to_decimal17(p.residual);
        s["origin"] = provenance_name(p.origin);
        s["source"] = p.source;
        if (p.certificate) {
            const auto& c = *p.certificate;
            Json cj;
            cj["certified"] = c.certified;
            cj["real"] = c.real_certified;
            cj["inflation"] = to_decimal17(c.inflation);
            cj["parameter_digest"] = c.parameter_digest;
            if (c.certified) {
                cj["box"] = box_json(c.box);
                cj["image"] = box_json(c.image);
            } else {
                cj["reason"] = c.reason;
            }
            s["certificate"] = cj;
        }
        sols.push_back(s);
    }
    j["solutions"] = sols;
    Json fails = Json::array();
    for (const auto& f : set.failures)
        fails.push_back({{"start", f.start_index},
                         {"status", f.status},
                         {"t", to_decimal17(f.t)},
                         {"residual", to_decimal17(f.residual)}});
    j["failures"] = fails;
    if (summary) {
        j["summary"] = {{"points", summary->points},
                        {"certified", summary->certified},
                        {"distinct", summary->distinct},
                        {"real_certified", summary->real_certified},
                        {"heuristic_real", summary->heuristic_real}};
    }
    return j.dump(1) + "\n";
}

SolutionsFile solutions_from_json(const std::string& text, const ModelSpec* model)
{
    Json j = parse_json(text, "solutions file");
    check_header(j, "mlsolve-solutions", solutions_format_version);
    SolutionsFile out;
    try {
        out.model = j.at("model").get<std::string>();
        out.model_digest = j.at("model_digest").get<std::string>();
        if (model && out.model_digest != model->digest())
            throw DataError("solutions file belongs to model " + out.model + " (digest " + out.model_digest +
                            "), not " + model->descriptor.canonical());
        auto& set = out.set;
        set.parameters = vector_of(j.at("parameters"));
        if (j.contains("exact_parameters")) {
            std::vector<Rational> e;
            for (const auto& q : j["exact_parameters"])
                e.push_back(parse_rational(q.get<std::string>()));
            set.exact_parameters = std::move(e);
        }
        if (!j.at("expected").is_null())
            set.expected = j["expected"].get<std::size_t>();
        set.complete = j.at("complete").get<bool>();
        for (const auto& s : j.at("solutions")) {
            Solution p;
            p.x = vector_of(s.at("x"));
            p.residual = number(s.at("residual"), "a residual");
            p.origin = parse_provenance(s.at("origin").get<std::string>());
            p.source = s.at("source").get<long>();
            if (s.contains("certificate")) {
                const auto& cj = s["certificate"];
                Certificate c;
                c.certified = cj.at("certified").get<bool>();
                c.real_certified = cj.at("real").get<bool>();
                c.inflation = number(cj.at("inflation"), "an inflation");
                c.parameter_digest = cj.at("parameter_digest").get<std::string>();
                if (c.certified) {
                    c.box = box_of(cj.at("box"));
                    c.image = box_of(cj.at("image"));
                } else {
                    c.reason = cj.value("reason", std::string());
                }
                p.certificate = std::move(c);
            }
            set.points.push_back(std::move(p));
        }
        for (const auto& f : j.at("failures"))
            set.failures.push_back({f.at("start").get<std::size_t>(), f.at("status").get<std::string>(),
                                    number(f.at("t"), "a path time"), number(f.at("residual"), "a residual")});
        if (j.contains("summary")) {
            const auto& sj = j["summary"];
            CertifySummary sum;
            sum.points = sj.at("points").get<std::size_t>();
            sum.certified = sj.at("certified").get<std::size_t>();
            sum.distinct = sj.at("distinct").get<std::size_t>();
            sum.real_certified = sj.at("real_certified").get<std::size_t>();
            sum.heuristic_real = sj.at("heuristic_real").get<std::size_t>();
            out.summary = sum;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("solutions file: ") + e.what());
    }
    return out;
}

void write_solutions(const SolutionSet& set, const ModelSpec& model, const std::string& path,
                     const std::optional<CertifySummary>& summary)
{
    write_file_atomic(path, solutions_to_json(set, model, summary));
}

SolutionsFile read_solutions(const std::string& path, const ModelSpec* model)
{
    return solutions_from_json(read_file(path), model);
}

std::string cache_to_json(const StartSystemCache& cache)
{
    Json j;
    j["format"] = "mlsolve-start-system";
    j["version"] = cache_format_version;
    j["model"] = cache.model;
    j["model_digest"] = cache.model_digest;
    j["tool"] = cache.tool;
    j["seed"] = cache.seed;
    j["expected"] = cache.expected ? Json(*cache.expected) : Json(nullptr);
    j["complete"] = cache.complete;
    j["count"] = cache.solutions.size();
    j["s_star"] = vector_json(cache.s_star);
    Json sols = Json::array();
    for (const auto& x : cache.solutions)
        sols.push_back(vector_json(x));
    j["solutions"] = sols;
    if (cache.real_parameters && cache.real_start) {
        Json rp = Json::array(), rs = Json::array();
        for (const auto& q : *cache.real_parameters)
            rp.push_back(to_string(q));
        for (double v : *cache.real_start)
            rs.push_back(to_decimal17(v));
        j["real_parameters"] = rp;
        j["real_start"] = rs;
    }
    return j.dump(1) + "\n";
}

StartSystemCache cache_from_json(const std::string& text)
{
    Json j = parse_json(text, "start-system cache");
    check_header(j, "mlsolve-start-system", cache_format_version);
    StartSystemCache c;
    try {
        c.model = j.at("model").get<std::string>();
        c.model_digest = j.at("model_digest").get<std::string>();
        c.tool = j.at("tool").get<std::string>();
        c.seed = j.at("seed").get<std::uint64_t>();
        if (!j.at("expected").is_null())
            c.expected = j["expected"].get<std::size_t>();
        c.complete = j.at("complete").get<bool>();
        c.s_star = vector_of(j.at("s_star"));
        for (const auto& x : j.at("solutions"))
            c.solutions.push_back(vector_of(x));
        if (j.contains("real_parameters") && j.contains("real_start")) {
            std::vector<Rational> rp;
            std::vector<double> rs;
            for (const auto& q : j["real_parameters"])
                rp.push_back(parse_rational(q.get<std::string>()));
            for (const auto& v : j["real_start"])
                rs.push_back(number(v, "a real start coordinate"));
            c.real_parameters = std::move(rp);
            c.real_start = std::move(rs);
        }
        if (j.at("count").get<std::size_t>() != c.solutions.size())
            throw FormatError("start-system cache: count does not match the solution list");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("start-system cache: ") + e.what());
    }
    return c;
}

} // namespace mlsolve

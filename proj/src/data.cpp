#include "auditfair/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "auditfair/encode.hpp"
#include "auditfair/rng.hpp"

namespace auditfair {

namespace {

std::string normalize_header(std::string s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' || c == '-') c = '_';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  // strip UTF-8 BOM and surrounding whitespace remnants
  while (!out.empty() && (out.front() == '\xef' || out.front() == '\xbb' || out.front() == '\xbf'))
    out.erase(out.begin());
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

[[noreturn]] void bad_value(size_t row, const std::string& column, const std::string& token) {
  raise(Errc::InvalidValue,
        "row " + std::to_string(row) + ", column '" + column + "': invalid value '" + token + "'");
}

bool parse_bool(const std::string& token, bool& out) {
  std::string t = lower(token);
  if (t == "1" || t == "true" || t == "yes") { out = true; return true; }
  if (t == "0" || t == "false" || t == "no") { out = false; return true; }
  return false;
}

bool parse_binary(const std::string& token, int& out) {
  if (token == "0") { out = 0; return true; }
  if (token == "1") { out = 1; return true; }
  return false;
}

bool parse_age(const std::string& token, AgeGroup& out) {
  std::string t = lower(token);
  if (t == "young" || t == "y") { out = AgeGroup::Young; return true; }
  // three-way codings collapse middle and old into Older
  if (t == "older" || t == "old" || t == "o" || t == "middle" || t == "m" || t == "old/middle") {
    out = AgeGroup::Older;
    return true;
  }
  return false;
}

bool parse_gender(const std::string& token, Gender& out) {
  std::string t = lower(token);
  if (t == "f" || t == "female") { out = Gender::F; return true; }
  if (t == "m" || t == "male") { out = Gender::M; return true; }
  return false;
}

bool parse_occupation(const std::string& token, Occupation& out) {
  std::string t = lower(token);
  if (t == "admin") { out = Occupation::Admin; return true; }
  if (t == "sales") { out = Occupation::Sales; return true; }
  if (t == "janitor") { out = Occupation::Janitor; return true; }
  if (t == "security") { out = Occupation::Security; return true; }
  return false;
}

bool parse_resume_type(const std::string& token, ResumeType& out) {
  std::string t = lower(token);
  if (t == "y") { out = ResumeType::Y; return true; }
  if (t == "m") { out = ResumeType::M; return true; }
  if (t == "o") { out = ResumeType::O; return true; }
  if (t == "b") { out = ResumeType::B; return true; }
  if (t == "bl") { out = ResumeType::BL; return true; }
  if (t == "be") { out = ResumeType::BE; return true; }
  return false;
}

bool parse_template(const std::string& token, ResumeTemplate& out) {
  std::string t = lower(token);
  if (t == "a") { out = ResumeTemplate::A; return true; }
  if (t == "b") { out = ResumeTemplate::B; return true; }
  if (t == "c") { out = ResumeTemplate::C; return true; }
  return false;
}

// canonical column order for writing
const std::vector<std::string> kColumns = {
    "city_zip", "age_group", "gender",  "employment",     "occupation", "type",
    "template", "spanish",   "internship", "customer_service", "cpr",    "tech_skills",
    "wpm",      "grammar",   "college", "employee_month", "volunteer",  "skill",
    "callback"};

}  // namespace

// ---------------------------------------------------------------------------
// Dataset helpers
// ---------------------------------------------------------------------------

GroupCounts group_counts(const Dataset& data) {
  GroupCounts gc;
  for (const auto& r : data.records) {
    if (r.age_group == AgeGroup::Young) {
      ++gc.young;
      gc.young_callbacks += static_cast<size_t>(r.callback);
    } else {
      ++gc.older;
      gc.older_callbacks += static_cast<size_t>(r.callback);
    }
  }
  return gc;
}

Dataset subset(const Dataset& data, std::span<const size_t> indices) {
  Dataset out;
  out.schema_version = data.schema_version;
  out.provenance = data.provenance;
  out.trail = data.trail;
  out.records.reserve(indices.size());
  for (size_t i : indices) out.records.push_back(data.records[i]);
  return out;
}

const char* to_string(AgeGroup g) { return g == AgeGroup::Young ? "young" : "older"; }
const char* to_string(Gender g) { return g == Gender::F ? "F" : "M"; }
const char* to_string(Occupation o) {
  switch (o) {
    case Occupation::Admin: return "Admin";
    case Occupation::Sales: return "Sales";
    case Occupation::Janitor: return "Janitor";
    case Occupation::Security: return "Security";
  }
  return "?";
}
const char* to_string(ResumeType t) {
  switch (t) {
    case ResumeType::Y: return "Y";
    case ResumeType::M: return "M";
    case ResumeType::O: return "O";
    case ResumeType::B: return "B";
    case ResumeType::BL: return "BL";
    case ResumeType::BE: return "BE";
  }
  return "?";
}
const char* to_string(ResumeTemplate t) {
  switch (t) {
    case ResumeTemplate::A: return "A";
    case ResumeTemplate::B: return "B";
    case ResumeTemplate::C: return "C";
  }
  return "?";
}
const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Ingested: return "Ingested";
    case Provenance::Synthetic: return "Synthetic";
    case Provenance::Resampled: return "Resampled";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open '" + path + "'");
  return load_csv(in, path);
}

Dataset load_csv(std::istream& in, const std::string& origin) {
  std::string header;
  if (!std::getline(in, header)) raise(Errc::EmptyFile, origin + " is empty");

  std::vector<std::string> names = split_csv_line(header);
  std::map<std::string, int> position;
  for (size_t i = 0; i < names.size(); ++i) {
    std::string n = normalize_header(names[i]);
    if (n == "resume_type") n = "type";  // documented alias
    position[n] = static_cast<int>(i);
  }
  for (const auto& col : kColumns) {
    if (!position.count(col)) raise(Errc::MissingColumn, origin + " lacks column '" + col + "'");
  }
  const bool has_latent = position.count("latent_callback") > 0;

  auto col = [&](const std::vector<std::string>& f, const std::string& name) -> const std::string& {
    return f[static_cast<size_t>(position.at(name))];
  };

  Dataset data;
  data.provenance = Provenance::Ingested;
  std::string line;
  size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() != names.size())
      raise(Errc::InvalidValue, "row " + std::to_string(row) + ": expected " +
                                    std::to_string(names.size()) + " fields, got " +
                                    std::to_string(f.size()));
    ApplicantRecord r;
    r.city_zip = col(f, "city_zip");
    if (r.city_zip.empty()) bad_value(row, "city_zip", "");
    if (!parse_age(col(f, "age_group"), r.age_group)) bad_value(row, "age_group", col(f, "age_group"));
    if (!parse_gender(col(f, "gender"), r.gender)) bad_value(row, "gender", col(f, "gender"));
    if (!parse_bool(col(f, "employment"), r.employment)) bad_value(row, "employment", col(f, "employment"));
    if (!parse_occupation(col(f, "occupation"), r.occupation)) bad_value(row, "occupation", col(f, "occupation"));
    if (!parse_resume_type(col(f, "type"), r.resume_type)) bad_value(row, "type", col(f, "type"));
    if (!parse_template(col(f, "template"), r.tmpl)) bad_value(row, "template", col(f, "template"));
    if (!parse_bool(col(f, "spanish"), r.spanish)) bad_value(row, "spanish", col(f, "spanish"));
    if (!parse_bool(col(f, "internship"), r.internship)) bad_value(row, "internship", col(f, "internship"));
    if (!parse_bool(col(f, "customer_service"), r.customer_service))
      bad_value(row, "customer_service", col(f, "customer_service"));
    if (!parse_bool(col(f, "cpr"), r.cpr)) bad_value(row, "cpr", col(f, "cpr"));
    if (!parse_bool(col(f, "tech_skills"), r.tech_skills)) bad_value(row, "tech_skills", col(f, "tech_skills"));
    {
      const std::string& t = col(f, "wpm");
      if (t == "45") r.wpm = 45;
      else if (t == "50") r.wpm = 50;
      else if (t == "55") r.wpm = 55;
      else bad_value(row, "wpm", t);
    }
    if (!parse_bool(col(f, "grammar"), r.grammar)) bad_value(row, "grammar", col(f, "grammar"));
    if (!parse_bool(col(f, "college"), r.college)) bad_value(row, "college", col(f, "college"));
    if (!parse_bool(col(f, "employee_month"), r.employee_month))
      bad_value(row, "employee_month", col(f, "employee_month"));
    if (!parse_bool(col(f, "volunteer"), r.volunteer)) bad_value(row, "volunteer", col(f, "volunteer"));
    if (!parse_binary(col(f, "skill"), r.skill)) bad_value(row, "skill", col(f, "skill"));
    if (!parse_binary(col(f, "callback"), r.callback)) bad_value(row, "callback", col(f, "callback"));
    if (has_latent) {
      const std::string& t = col(f, "latent_callback");
      if (!t.empty()) {
        int v = 0;
        if (!parse_binary(t, v)) bad_value(row, "latent_callback", t);
        r.latent_callback = v;
      }
    }
    data.records.push_back(std::move(r));
  }
  if (data.records.empty()) raise(Errc::EmptyFile, origin + " has a header but no rows");
  data.trail.push_back("load_csv source=" + origin + " rows=" + std::to_string(data.records.size()));
  return data;
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  write_csv(data, out);
}

void write_csv(const Dataset& data, std::ostream& out) {
  bool any_latent = std::any_of(data.records.begin(), data.records.end(),
                                [](const ApplicantRecord& r) { return r.latent_callback.has_value(); });
  for (size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
  if (any_latent) out << ",latent_callback";
  out << "\n";
  for (const auto& r : data.records) {
    out << r.city_zip << ',' << to_string(r.age_group) << ',' << to_string(r.gender) << ','
        << int(r.employment) << ',' << to_string(r.occupation) << ',' << to_string(r.resume_type)
        << ',' << to_string(r.tmpl) << ',' << int(r.spanish) << ',' << int(r.internship) << ','
        << int(r.customer_service) << ',' << int(r.cpr) << ',' << int(r.tech_skills) << ',' << r.wpm
        << ',' << int(r.grammar) << ',' << int(r.college) << ',' << int(r.employee_month) << ','
        << int(r.volunteer) << ',' << r.skill << ',' << r.callback;
    if (any_latent) {
      out << ',';
      if (r.latent_callback) out << *r.latent_callback;
    }
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  if (n_records == 0 && !exact_counts) raise(Errc::InvalidConfig, "n_records must be positive");
  if (p_young < 0 || p_young > 1) raise(Errc::InvalidConfig, "p_young outside [0,1]");
  if (base_callback_rate < 0 || base_callback_rate > 1)
    raise(Errc::InvalidConfig, "base_callback_rate outside [0,1]");
  if (discrimination_delta < 0 || discrimination_delta > base_callback_rate)
    raise(Errc::InvalidConfig, "require 0 <= discrimination_delta <= base_callback_rate");
  if (exact_counts) {
    const auto& e = *exact_counts;
    if (e.young_total == 0 || e.older_total == 0)
      raise(Errc::InvalidConfig, "exact_counts groups must be non-empty");
    if (e.young_callbacks > e.young_total || e.older_callbacks > e.older_total)
      raise(Errc::InvalidConfig, "exact_counts callbacks exceed group size");
  }
}

std::map<std::string, double> SynthConfig::default_qualification_weights() {
  // Weights on encoded columns (age excluded). The skill flag carries most of
  // the signal, splitting applicants into a small strong pool and a large
  // weak one; Spanish fluency stays predictive of callbacks.
  return {
      {"skill", 2.6},       {"spanish", 0.4},        {"customer_service", 0.3},
      {"tech_skills", 0.3}, {"college", 0.25},       {"employment", 0.35},
      {"grammar", 0.4},     {"wpm", 0.2},            {"cpr", 0.1},
      {"employee_month", 0.15}, {"volunteer", 0.1},  {"internship", -0.1},
      {"occupation_admin", 0.05}, {"occupation_sales", 0.1},
      {"occupation_janitor", -0.05}, {"occupation_security", -0.1},
  };
}

SynthConfig SynthConfig::audit_table_replica(uint64_t seed) {
  SynthConfig c;
  c.exact_counts = ExactCounts{13401, 25532, 2505, 3587};
  c.n_records = 13401 + 25532;
  c.p_young = 13401.0 / (13401.0 + 25532.0);
  // The latent rate sits just under the Young observed rate, so hitting the
  // observed counts plants a few hundred Young lifts and a large block of
  // Older suppressions, mirroring the audit finding that the gap comes from
  // suppressed older callbacks.
  c.base_callback_rate = 0.183;
  c.discrimination_delta = 2505.0 / 13401.0 - 3587.0 / 25532.0;  // 0.0464
  c.qualification_weights = default_qualification_weights();
  c.seed = seed;
  return c;
}

namespace {

std::vector<double> cumulative(const std::vector<double>& w, const char* what) {
  if (w.empty()) raise(Errc::InvalidConfig, std::string("empty distribution for ") + what);
  std::vector<double> c(w.size());
  double acc = 0;
  for (size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 0) raise(Errc::InvalidConfig, std::string("negative probability in ") + what);
    acc += w[i];
    c[i] = acc;
  }
  if (acc <= 0) raise(Errc::InvalidConfig, std::string("zero-mass distribution for ") + what);
  return c;
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// intercept b with mean(sigmoid(b + s_i)) == target, by bisection
double calibrate_intercept(const std::vector<double>& scores, double target) {
  double lo = -30, hi = 30;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (lo + hi);
    double mean = 0;
    for (double s : scores) mean += sigmoid(mid + s);
    mean /= static_cast<double>(scores.size());
    if (mean < target) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config) {
  config.validate();

  Rng rng_age = rng_stream(config.seed, "synth-age");
  Rng rng_cov = rng_stream(config.seed, "synth-cov");
  Rng rng_label = rng_stream(config.seed, "synth-label");
  Rng rng_flip = rng_stream(config.seed, "synth-flip");

  const size_t n = config.exact_counts
                       ? config.exact_counts->young_total + config.exact_counts->older_total
                       : config.n_records;

  // age assignment
  std::vector<AgeGroup> age(n, AgeGroup::Older);
  if (config.exact_counts) {
    for (size_t i = 0; i < config.exact_counts->young_total; ++i) age[i] = AgeGroup::Young;
    rng_age.shuffle(age);
  } else {
    for (size_t i = 0; i < n; ++i) age[i] = rng_age.bernoulli(config.p_young) ? AgeGroup::Young : AgeGroup::Older;
  }

  // covariates, independent of age
  const FeatureMarginals& m = config.marginals;
  std::vector<double> city_w;
  for (const auto& [name, w] : m.cities) {
    (void)name;
    city_w.push_back(w);
  }
  auto city_cum = cumulative(city_w, "cities");
  auto occ_cum = cumulative(m.occupation, "occupation");
  auto type_cum = cumulative(m.resume_type, "resume_type");
  auto tmpl_cum = cumulative(m.tmpl, "template");
  auto wpm_cum = cumulative(m.wpm, "wpm");
  const int wpm_values[3] = {45, 50, 55};

  Dataset data;
  data.provenance = Provenance::Synthetic;
  data.records.resize(n);
  for (size_t i = 0; i < n; ++i) {
    ApplicantRecord& r = data.records[i];
    r.city_zip = m.cities[rng_cov.categorical(city_cum)].first;
    r.age_group = age[i];
    r.gender = rng_cov.bernoulli(m.p_female) ? Gender::F : Gender::M;
    r.employment = rng_cov.bernoulli(m.p_employed);
    r.occupation = static_cast<Occupation>(rng_cov.categorical(occ_cum));
    r.resume_type = static_cast<ResumeType>(rng_cov.categorical(type_cum));
    r.tmpl = static_cast<ResumeTemplate>(rng_cov.categorical(tmpl_cum));
    r.spanish = rng_cov.bernoulli(m.p_spanish);
    r.internship = rng_cov.bernoulli(m.p_internship);
    r.customer_service = rng_cov.bernoulli(m.p_customer_service);
    r.cpr = rng_cov.bernoulli(m.p_cpr);
    r.tech_skills = rng_cov.bernoulli(m.p_tech_skills);
    r.wpm = wpm_values[rng_cov.categorical(wpm_cum)];
    r.grammar = rng_cov.bernoulli(m.p_grammar);
    r.college = rng_cov.bernoulli(m.p_college);
    r.employee_month = rng_cov.bernoulli(m.p_employee_month);
    r.volunteer = rng_cov.bernoulli(m.p_volunteer);
    r.skill = rng_cov.bernoulli(m.p_high_skill) ? 1 : 0;
  }

  // qualification score w.x on the encoded covariates (no age column)
  FeatureEncoder enc;
  enc.fit(data, EncodeOptions{.include_age = false, .city_min_freq = 0.0});
  FeatureMatrix x = enc.transform(data);
  const auto& weights =
      config.qualification_weights.empty() ? SynthConfig::default_qualification_weights()
                                           : config.qualification_weights;
  std::vector<double> w(x.cols, 0.0);
  for (const auto& [name, value] : weights) {
    if (!x.has_column(name))
      raise(Errc::InvalidConfig, "qualification weight on unknown column '" + name + "'");
    w[x.column_index(name)] = value;
  }
  std::vector<double> score(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double s = 0;
    auto row = x.row(i);
    for (size_t c = 0; c < x.cols; ++c) s += w[c] * row[c];
    score[i] = s;
  }
  const double intercept = calibrate_intercept(score, config.base_callback_rate);

  // latent labels Y*, then observed labels via planted flips
  for (size_t i = 0; i < n; ++i) {
    int y_star = rng_label.bernoulli(sigmoid(intercept + score[i])) ? 1 : 0;
    data.records[i].latent_callback = y_star;
    data.records[i].callback = y_star;
  }

  auto pool_of = [&](AgeGroup g, int label) {
    std::vector<size_t> pool;
    for (size_t i = 0; i < n; ++i)
      if (data.records[i].age_group == g && data.records[i].callback == label) pool.push_back(i);
    return pool;
  };

  size_t flips_young_up = 0, flips_older_down = 0;
  size_t flips_young_down = 0, flips_older_up = 0;

  if (config.exact_counts) {
    // hit each group's observed callback count exactly; flips in the bias
    // direction (Young up, Older down) are the planted discrimination
    const auto& e = *config.exact_counts;
    GroupCounts gc = group_counts(data);

    auto adjust = [&](AgeGroup g, size_t current, size_t target, size_t& up, size_t& down) {
      if (current < target) {
        auto pool = pool_of(g, 0);
        size_t need = target - current;
        if (need > pool.size())
          raise(Errc::InfeasibleDelta, "not enough negatives to reach exact counts");
        rng_flip.shuffle(pool);
        for (size_t i = 0; i < need; ++i) data.records[pool[i]].callback = 1;
        up += need;
      } else if (current > target) {
        auto pool = pool_of(g, 1);
        size_t need = current - target;
        if (need > pool.size())
          raise(Errc::InfeasibleDelta, "not enough positives to reach exact counts");
        rng_flip.shuffle(pool);
        for (size_t i = 0; i < need; ++i) data.records[pool[i]].callback = 0;
        down += need;
      }
    };
    adjust(AgeGroup::Young, gc.young_callbacks, e.young_callbacks, flips_young_up, flips_young_down);
    adjust(AgeGroup::Older, gc.older_callbacks, e.older_callbacks, flips_older_up, flips_older_down);
  } else if (config.discrimination_delta > 0) {
    // paired flips until the observed gap first reaches the planted delta
    auto young_neg = pool_of(AgeGroup::Young, 0);
    auto older_pos = pool_of(AgeGroup::Older, 1);
    rng_flip.shuffle(young_neg);
    rng_flip.shuffle(older_pos);

    GroupCounts gc = group_counts(data);
    double young_cb = static_cast<double>(gc.young_callbacks);
    double older_cb = static_cast<double>(gc.older_callbacks);
    const double ny = static_cast<double>(gc.young), no = static_cast<double>(gc.older);
    if (ny == 0 || no == 0) raise(Errc::InfeasibleDelta, "both age groups must be present");

    size_t iy = 0, io = 0;
    while (young_cb / ny - older_cb / no < config.discrimination_delta) {
      if (iy >= young_neg.size() || io >= older_pos.size())
        raise(Errc::InfeasibleDelta,
              "flip pools exhausted before reaching delta=" + std::to_string(config.discrimination_delta));
      data.records[young_neg[iy++]].callback = 1;
      data.records[older_pos[io++]].callback = 0;
      young_cb += 1;
      older_cb -= 1;
    }
    flips_young_up = iy;
    flips_older_down = io;
  }
  // delta == 0: no flips, Y == Y* for every record

  {
    std::ostringstream note;
    note << "generate_synthetic seed=" << config.seed << " n=" << n
         << " flips_young_up=" << flips_young_up << " flips_older_down=" << flips_older_down;
    if (flips_young_down || flips_older_up)
      note << " flips_young_down=" << flips_young_down << " flips_older_up=" << flips_older_up;
    data.trail.push_back(note.str());
  }
  return data;
}

// ---------------------------------------------------------------------------
// Declarative synth config (JSON)
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      raise(Errc::InvalidConfig, "unknown key '" + it.key() + "' in " + where);
  }
}

std::vector<double> get_dist(const json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<std::vector<double>>();
}

}  // namespace

SynthConfig parse_synth_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  expect_keys(j,
              {"n_records", "p_young", "base_callback_rate", "discrimination_delta",
               "exact_counts", "marginals", "qualification_weights", "seed"},
              "synth config");
  SynthConfig c;
  c.qualification_weights = SynthConfig::default_qualification_weights();
  try {
    if (j.contains("n_records")) c.n_records = j.at("n_records").get<size_t>();
    if (j.contains("p_young")) c.p_young = j.at("p_young").get<double>();
    if (j.contains("base_callback_rate")) c.base_callback_rate = j.at("base_callback_rate").get<double>();
    if (j.contains("discrimination_delta"))
      c.discrimination_delta = j.at("discrimination_delta").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("exact_counts")) {
      const json& e = j.at("exact_counts");
      expect_keys(e, {"young_total", "older_total", "young_callbacks", "older_callbacks"},
                  "exact_counts");
      c.exact_counts = ExactCounts{e.at("young_total").get<size_t>(), e.at("older_total").get<size_t>(),
                                   e.at("young_callbacks").get<size_t>(),
                                   e.at("older_callbacks").get<size_t>()};
    }
    if (j.contains("qualification_weights"))
      c.qualification_weights = j.at("qualification_weights").get<std::map<std::string, double>>();
    if (j.contains("marginals")) {
      const json& m = j.at("marginals");
      expect_keys(m,
                  {"cities", "p_female", "p_employed", "occupation", "resume_type", "template",
                   "p_spanish", "p_internship", "p_customer_service", "p_cpr", "p_tech_skills",
                   "wpm", "p_grammar", "p_college", "p_employee_month", "p_volunteer",
                   "p_high_skill"},
                  "marginals");
      FeatureMarginals& fm = c.marginals;
      if (m.contains("cities")) {
        fm.cities.clear();
        for (auto it = m.at("cities").begin(); it != m.at("cities").end(); ++it)
          fm.cities.emplace_back(it.key(), it.value().get<double>());
        std::sort(fm.cities.begin(), fm.cities.end());
      }
      fm.p_female = m.value("p_female", fm.p_female);
      fm.p_employed = m.value("p_employed", fm.p_employed);
      fm.occupation = get_dist(m, "occupation", fm.occupation);
      fm.resume_type = get_dist(m, "resume_type", fm.resume_type);
      fm.tmpl = get_dist(m, "template", fm.tmpl);
      fm.p_spanish = m.value("p_spanish", fm.p_spanish);
      fm.p_internship = m.value("p_internship", fm.p_internship);
      fm.p_customer_service = m.value("p_customer_service", fm.p_customer_service);
      fm.p_cpr = m.value("p_cpr", fm.p_cpr);
      fm.p_tech_skills = m.value("p_tech_skills", fm.p_tech_skills);
      fm.wpm = get_dist(m, "wpm", fm.wpm);
      fm.p_grammar = m.value("p_grammar", fm.p_grammar);
      fm.p_college = m.value("p_college", fm.p_college);
      fm.p_employee_month = m.value("p_employee_month", fm.p_employee_month);
      fm.p_volunteer = m.value("p_volunteer", fm.p_volunteer);
      fm.p_high_skill = m.value("p_high_skill", fm.p_high_skill);
    }
  } catch (const json::exception& e) {
    raise(Errc::InvalidConfig, std::string("bad synth config value: ") + e.what());
  }
  c.validate();
  return c;
}

SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_synth_config(buf.str());
}

std::string synth_config_to_json(const SynthConfig& c) {
  json j;
  j["n_records"] = c.n_records;
  j["p_young"] = c.p_young;
  j["base_callback_rate"] = c.base_callback_rate;
  j["discrimination_delta"] = c.discrimination_delta;
  j["seed"] = c.seed;
  if (c.exact_counts) {
    j["exact_counts"] = {{"young_total", c.exact_counts->young_total},
                         {"older_total", c.exact_counts->older_total},
                         {"young_callbacks", c.exact_counts->young_callbacks},
                         {"older_callbacks", c.exact_counts->older_callbacks}};
  }
  const FeatureMarginals& m = c.marginals;
  json cities = json::object();
  for (const auto& [name, p] : m.cities) cities[name] = p;
  j["marginals"] = {{"cities", cities},
                    {"p_female", m.p_female},
                    {"p_employed", m.p_employed},
                    {"occupation", m.occupation},
                    {"resume_type", m.resume_type},
                    {"template", m.tmpl},
                    {"p_spanish", m.p_spanish},
                    {"p_internship", m.p_internship},
                    {"p_customer_service", m.p_customer_service},
                    {"p_cpr", m.p_cpr},
                    {"p_tech_skills", m.p_tech_skills},
                    {"wpm", m.wpm},
                    {"p_grammar", m.p_grammar},
                    {"p_college", m.p_college},
                    {"p_employee_month", m.p_employee_month},
                    {"p_volunteer", m.p_volunteer},
                    {"p_high_skill", m.p_high_skill}};
  j["qualification_weights"] = c.qualification_weights.empty()
                                   ? SynthConfig::default_qualification_weights()
                                   : c.qualification_weights;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

std::vector<size_t> FoldAssignment::test_indices(int fold) const {
  std::vector<size_t> idx;
  for (size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) idx.push_back(i);
  return idx;
}

std::vector<size_t> FoldAssignment::train_indices(int fold) const {
  std::vector<size_t> idx;
  for (size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) idx.push_back(i);
  return idx;
}

FoldAssignment kfold_split(const Dataset& data, int k, uint64_t seed) {
  if (k < 2 || static_cast<size_t>(k) > data.size())
    raise(Errc::TooFewRecords, "need 2 <= k <= record count, got k=" + std::to_string(k) +
                                   " with " + std::to_string(data.size()) + " records");

  // strata: (age_group, callback)
  std::vector<std::vector<size_t>> strata(4);
  for (size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.records[i];
    size_t s = (r.age_group == AgeGroup::Young ? 0u : 2u) + (r.callback ? 1u : 0u);
    strata[s].push_back(i);
  }

  Rng rng = rng_stream(seed, "kfold");
  FoldAssignment fa;
  fa.k = k;
  fa.fold_of.assign(data.size(), 0);
  // round-robin deal with a fold cursor carried across strata, which keeps
  // both per-stratum and total fold sizes within one of each other
  int cursor = 0;
  for (auto& stratum : strata) {
    rng.shuffle(stratum);
    for (size_t i : stratum) {
      fa.fold_of[i] = cursor;
      cursor = (cursor + 1) % k;
    }
  }
  return fa;
}

}  // namespace auditfair

#include "avloc/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

#include "avloc/error.hpp"

namespace avloc {

namespace {

struct Field {
  const char* name;
  std::variant<int RunConfig::*, double RunConfig::*, uint64_t RunConfig::*> member;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"image_size", &RunConfig::image_size},
      {"spec_bins", &RunConfig::spec_bins},
      {"spec_frames", &RunConfig::spec_frames},
      {"grid", &RunConfig::grid},
      {"channels", &RunConfig::channels},
      {"softmax_temperature", &RunConfig::softmax_temperature},
      {"recursion_steps", &RunConfig::recursion_steps},
      {"w1", &RunConfig::w1},
      {"w2", &RunConfig::w2},
      {"w3", &RunConfig::w3},
      {"tau", &RunConfig::tau},
      {"delta", &RunConfig::delta},
      {"lambda1", &RunConfig::lambda1},
      {"lambda2", &RunConfig::lambda2},
      {"ssl_pos_thresh", &RunConfig::ssl_pos_thresh},
      {"ssl_neg_thresh", &RunConfig::ssl_neg_thresh},
      {"ssl_temp", &RunConfig::ssl_temp},
      {"lr", &RunConfig::lr},
      {"batch_size", &RunConfig::batch_size},
      {"epochs", &RunConfig::epochs},
      {"max_steps", &RunConfig::max_steps},
      {"seed", &RunConfig::seed},
      {"checkpoint_every", &RunConfig::checkpoint_every},
      {"num_classes", &RunConfig::num_classes},
      {"train_scenes", &RunConfig::train_scenes},
      {"test_scenes", &RunConfig::test_scenes},
      {"object_scale_min", &RunConfig::object_scale_min},
      {"object_scale_max", &RunConfig::object_scale_max},
      {"distractor_count", &RunConfig::distractor_count},
      {"sample_rate", &RunConfig::sample_rate},
      {"act_thresh", &RunConfig::act_thresh},
  };
  return f;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      // allow blank lines only
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw DataError("config: expected 'key = value' at line " + std::to_string(lineno));
      }
      continue;
    }
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) {
      throw DataError("config: empty key or value at line " + std::to_string(lineno));
    }
    bool found = false;
    for (const Field& f : fields()) {
      if (key != f.name) continue;
      found = true;
      try {
        size_t used = 0;
        if (std::holds_alternative<int RunConfig::*>(f.member)) {
          cfg.*std::get<int RunConfig::*>(f.member) = std::stoi(val, &used);
        } else if (std::holds_alternative<double RunConfig::*>(f.member)) {
          cfg.*std::get<double RunConfig::*>(f.member) = std::stod(val, &used);
        } else {
          cfg.*std::get<uint64_t RunConfig::*>(f.member) = std::stoull(val, &used);
        }
        if (used != val.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw DataError("config: bad value '" + val + "' for key '" + key + "' at line " +
                        std::to_string(lineno));
      }
      break;
    }
    if (!found) throw DataError("config: unknown key '" + key + "' at line " + std::to_string(lineno));
  }
  cfg.validate();
  return cfg;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const Field& f : fields()) {
    out << f.name << " = ";
    if (std::holds_alternative<int RunConfig::*>(f.member)) {
      out << this->*std::get<int RunConfig::*>(f.member);
    } else if (std::holds_alternative<double RunConfig::*>(f.member)) {
      out << fmt_double(this->*std::get<double RunConfig::*>(f.member));
    } else {
      out << this->*std::get<uint64_t RunConfig::*>(f.member);
    }
    out << "\n";
  }
  return out.str();
}

void RunConfig::validate() const {
  if (image_size < 8) throw DataError("config: image_size must be >= 8");
  if (spec_bins < 8 || spec_frames < 8) throw DataError("config: spectrogram dims must be >= 8");
  if (grid < 2) throw DataError("config: grid must be >= 2");
  if (channels < 1) throw DataError("config: channels must be >= 1");
  if (!(softmax_temperature > 0)) throw DataError("config: softmax_temperature must be positive");
  if (recursion_steps < 1) throw DataError("config: recursion_steps must be >= 1");
  if (batch_size < 2) throw DataError("config: batch_size must be >= 2 (contrastive losses need pairs)");
  if (epochs < 1) throw DataError("config: epochs must be >= 1");
  if (max_steps < 0) throw DataError("config: max_steps must be >= 0");
  if (checkpoint_every < 1) throw DataError("config: checkpoint_every must be >= 1");
  if (!(lr > 0)) throw DataError("config: lr must be positive");
  if (!(act_thresh > 0 && act_thresh < 1)) throw DataError("config: act_thresh must be in (0,1)");
  loss_config().validate();
  final_weights().validate();
  scene_spec().validate();
}

LossConfig RunConfig::loss_config() const {
  LossConfig c;
  c.tau = tau;
  c.delta = delta;
  c.lambda1 = lambda1;
  c.lambda2 = lambda2;
  c.ssl_pos_thresh = ssl_pos_thresh;
  c.ssl_neg_thresh = ssl_neg_thresh;
  c.ssl_temp = ssl_temp;
  return c;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig c;
  c.image_size = image_size;
  c.spec_bins = spec_bins;
  c.spec_frames = spec_frames;
  c.grid = grid;
  c.channels = channels;
  c.softmax_temperature = softmax_temperature;
  c.recursion_steps = recursion_steps;
  return c;
}

SceneSpec RunConfig::scene_spec() const {
  SceneSpec s;
  s.seed = seed;
  s.num_classes = num_classes;
  s.image_size = image_size;
  s.spec_size = spec_bins;
  s.scale_min = object_scale_min;
  s.scale_max = object_scale_max;
  s.distractor_count = distractor_count;
  s.sample_rate = sample_rate;
  return s;
}

FinalMapWeights RunConfig::final_weights() const {
  FinalMapWeights w;
  w.w1 = w1;
  w.w2 = w2;
  w.w3 = w3;
  return w;
}

std::string RunConfig::divergence_note() const {
  std::ostringstream out;
  if (image_size != 224) out << "  image_size " << image_size << " (full-scale reference: 224)\n";
  if (spec_bins != 257 || spec_frames != 276) {
    out << "  spectrogram " << spec_bins << "x" << spec_frames << " (full-scale reference: 257x276)\n";
  }
  if (channels != 512) out << "  channels " << channels << " (full-scale reference: 512)\n";
  if (batch_size != 128) out << "  batch_size " << batch_size << " (full-scale reference: 128)\n";
  return out.str();
}

}  // namespace avloc

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcov/fit.hpp"

namespace stcov {

// Flat key = value text ('#' comments, dotted keys, space-separated lists).
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_vector(const std::string& key) const;
  std::vector<std::string> get_words(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long long value);
  void set_vector(const std::string& key, const std::vector<double>& values);

  std::string serialize() const;  // insertion order

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  const std::string* find(const std::string& key) const;
};

// Write via temp file + rename so readers never observe partial output.
void write_file_atomic(const std::string& path, const std::string& content);

// Dataset CSV: header loc_id,x,y[,z_aug],t,var,value, one row per
// (point, variable), '.' decimal, var 1-based. Doubles print with %.17g so
// a round trip is bit-exact.
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);

// Model spec <-> the "model.*" key block shared by configs and fit results.
void spec_to_kv(const ModelSpec& spec, KeyValueFile* kv);
ModelSpec spec_from_kv(const KeyValueFile& kv);

// Fit-result file: fit metadata, the parameter roster, the log-likelihood
// trace, the mean model, and the fitted model.* block so prediction can
// run without refitting.
void write_fit_result(const std::string& path, const FitResult& result, const MeanModel& mean,
                      int n_locations);
struct LoadedFit {
  FitResult result;
  MeanModel mean;
  int n_locations = 0;
};
LoadedFit read_fit_result(const std::string& path);

}  // namespace stcov

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace churn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; message carries the path and line where known.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Incompatible shapes or embedding dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

enum class Label : std::uint8_t { NonChurn = 0, Churn = 1 };
enum class Medium : std::uint8_t { Twitter, Chatbot };

inline int class_index(Label l) { return static_cast<int>(l); }
inline Label label_from_index(int i) { return i == 1 ? Label::Churn : Label::NonChurn; }
inline Label flip(Label l) { return l == Label::Churn ? Label::NonChurn : Label::Churn; }

inline std::string_view to_string(Label l) { return l == Label::Churn ? "churn" : "non_churn"; }
inline std::string_view to_string(Medium m) { return m == Medium::Twitter ? "twitter" : "chatbot"; }

/// Accepts "churn"/"non_churn" as well as the dataset encoding "1"/"0".
std::optional<Label> parse_label(std::string_view s);
std::optional<Medium> parse_medium(std::string_view s);

/// One annotated utterance as stored in the dataset files.
struct LabeledExample {
  std::string id;
  std::string raw_text;
  std::optional<std::string> source_brand;  // canonical brand id
  Label label = Label::NonChurn;
  double confidence = 1.0;
  std::string language = "en";
  Medium medium = Medium::Twitter;
};

}  // namespace churn

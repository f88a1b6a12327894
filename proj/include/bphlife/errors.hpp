#ifndef BPHLIFE_ERRORS_HPP
#define BPHLIFE_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace bphlife {

// Bad input: parameters, configuration, or a violated call precondition.
// `fields` names every offending field when the error came from a record.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what,
                           std::vector<std::string> fields = {})
      : std::invalid_argument(what), fields_(std::move(fields)) {}

  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  std::vector<std::string> fields_;
};

// A computation that cannot produce a trustworthy number: singular solves,
// underflowed normalisers, non-finite matrix entries, broken invariants.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bphlife

#endif  // BPHLIFE_ERRORS_HPP

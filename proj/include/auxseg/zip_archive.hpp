#pragma once

#include <map>
#include <string>
#include <string_view>

namespace auxseg {

/// Minimal ZIP container. Entries are written uncompressed ("stored") with
/// fixed timestamps so identical contents give identical archives; reading
/// also accepts deflated entries.
class ZipWriter {
 public:
  void add(std::string name, std::string_view data);
  std::string finish() const;

 private:
  std::map<std::string, std::string> entries_;  // sorted by name
};

/// Entry name -> contents. Throws FormatError for damaged archives or CRC
/// mismatches.
std::map<std::string, std::string> read_zip(std::string_view archive);

}  // namespace auxseg

#pragma once

#include <string>

namespace smooth {

/// Lowercase hex SHA-1 of a byte string.
std::string sha1_hex(const std::string& bytes);

/// Git-style blob hash: sha1("blob <size>\0" + content).
std::string git_blob_sha1(const std::string& content);

/// Blob hash of a file's content.
std::string git_blob_sha1_file(const std::string& path);

}  // namespace smooth

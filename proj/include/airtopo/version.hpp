#ifndef AIRTOPO_VERSION_HPP
#define AIRTOPO_VERSION_HPP

namespace airtopo {

constexpr const char* kVersion = "0.1.0";
constexpr int kReportSchemaVersion = 1;

} // namespace airtopo

#endif // AIRTOPO_VERSION_HPP

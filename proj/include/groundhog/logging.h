#ifndef GROUNDHOG_LOGGING_H_
#define GROUNDHOG_LOGGING_H_

namespace groundhog {

// Routes library logging to stderr at the level named by GROUNDHOG_LOG
// (error, info or debug; default info). Never touches command outputs.
void configure_logging();

}  // namespace groundhog

#endif  // GROUNDHOG_LOGGING_H_

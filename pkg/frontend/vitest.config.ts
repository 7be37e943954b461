import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // Let the acceptance suite's [criterion 12] report lines reach the
    // terminal instead of being swallowed by the reporter.
    disableConsoleIntercept: true,
  },
});

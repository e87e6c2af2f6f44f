"""Oracle-vs-closed-form verification suite."""

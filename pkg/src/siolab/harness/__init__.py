"""Config-driven experiment runner and its command line front end."""

# Models module - metric types and pydantic records

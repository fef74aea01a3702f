APP_NAME = "reclab"
AUTHOR = "reclab"
